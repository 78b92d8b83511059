"""Truncated multivariate Taylor series ("jets").

A jet of order K in m variables stores the Taylor coefficients
``c[a] = d^a f / a!`` for every multi-index ``a`` of total degree <= K,
densely, in graded-lexicographic order.  Because monomials are graded,
the coefficients of degree <= K' form a prefix of the coefficient vector,
so truncation is slicing.

Jets carry a leading *shape*: ``coeffs`` has shape ``shape + (N,)``.  This
lets one object hold a whole table of jets (a connection table, a frame)
or a batch of points, and lets index contractions run through
:func:`cein` in one numpy call.

Two scalar modes share the code path:

* exact -- object arrays of ``gmpy2.mpq`` rationals;
* float -- ``float64`` arrays.

The mode of a jet is read off its dtype.
"""

from __future__ import annotations

import functools
import math
from fractions import Fraction
from numbers import Rational
from typing import Callable, Sequence

import gmpy2
import numpy as np

mpq = gmpy2.mpq

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)


# ---------------------------------------------------------------------------
# scalars

def to_scalar(x, mode: str):
    """Convert a Python/numpy number to the scalar type of ``mode``."""
    if mode == EXACT:
        if isinstance(x, (bool, np.bool_)):
            return mpq(int(x))
        if isinstance(x, (int, np.integer)):
            return mpq(int(x))
        if isinstance(x, (Fraction, Rational)) or type(x) is type(mpq(0)):
            return mpq(x)
        if isinstance(x, (float, np.floating)):
            if float(x).is_integer():
                return mpq(int(x))
            raise TypeError(f"float constant {x!r} in exact mode")
        raise TypeError(f"cannot use {type(x).__name__} as an exact scalar")
    if mode == FLOAT:
        return float(x)
    raise ValueError(f"unknown scalar mode {mode!r}")


def as_array(values, mode: str) -> np.ndarray:
    """Array of scalars of the given mode (object/mpq or float64)."""
    if mode == FLOAT:
        arr = np.asarray(values)
        if arr.dtype == object:
            arr = np.vectorize(float, otypes=[float])(arr)
        return np.asarray(arr, dtype=float)
    arr = np.asarray(values, dtype=object)
    flat = [to_scalar(v, EXACT) for v in arr.ravel()]
    out = np.empty(arr.shape, dtype=object)
    out.ravel()[:] = flat if flat else []
    return out


def zeros(shape, mode: str) -> np.ndarray:
    if mode == FLOAT:
        return np.zeros(shape)
    out = np.empty(shape, dtype=object)
    out.fill(mpq(0))
    return out


def mode_of(arr: np.ndarray) -> str:
    return EXACT if arr.dtype == object else FLOAT


def _rational_sqrt(q):
    q = mpq(q)
    if q < 0:
        raise ValueError("sqrt of a negative value")
    num, den = q.numerator, q.denominator
    if not (gmpy2.is_square(num) and gmpy2.is_square(den)):
        raise ValueError(f"sqrt({q}) is irrational; not representable in exact mode")
    return mpq(gmpy2.isqrt(num), gmpy2.isqrt(den))


# ---------------------------------------------------------------------------
# multi-index tables

def _lex_degree(m: int, d: int):
    if m == 1:
        return [(d,)]
    out = []
    for first in range(d, -1, -1):
        for rest in _lex_degree(m - 1, d - first):
            out.append((first,) + rest)
    return out


@functools.lru_cache(maxsize=None)
def monomials(m: int, K: int) -> tuple:
    """Multi-indices of total degree <= K in graded-lex order."""
    out = []
    for d in range(K + 1):
        out.extend(_lex_degree(m, d))
    return tuple(out)


def size(m: int, K: int) -> int:
    return math.comb(m + K, K)


class _Tables:
    def __init__(self, m: int, K: int):
        monos = monomials(m, K)
        index = {a: i for i, a in enumerate(monos)}
        self.m, self.K, self.N = m, K, len(monos)
        self.monos, self.index = monos, index
        deg = [sum(a) for a in monos]
        I, J, T = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if deg[i] + deg[j] <= K:
                    I.append(i)
                    J.append(j)
                    T.append(index[tuple(x + y for x, y in zip(a, b))])
        order = np.argsort(T, kind="stable")
        self.I = np.asarray(I)[order]
        self.J = np.asarray(J)[order]
        T = np.asarray(T)[order]
        self.starts = np.flatnonzero(np.r_[True, T[1:] != T[:-1]])
        # partial derivative maps, output has order K-1
        self.dsrc, self.dfac = [], []
        if K >= 1:
            low = monos[: size(m, K - 1)]
            for d in range(m):
                src, fac = [], []
                for a in low:
                    b = list(a)
                    b[d] += 1
                    src.append(index[tuple(b)])
                    fac.append(a[d] + 1)
                self.dsrc.append(np.asarray(src))
                self.dfac.append(np.asarray(fac))
        self.factorial = np.asarray([math.prod(math.factorial(x) for x in a) for a in monos])


@functools.lru_cache(maxsize=None)
def tables(m: int, K: int) -> _Tables:
    return _Tables(m, K)


def _convolve(A: np.ndarray, B: np.ndarray, t: _Tables) -> np.ndarray:
    prod = A[..., t.I] * B[..., t.J]
    return np.add.reduceat(prod, t.starts, axis=-1)


# ---------------------------------------------------------------------------
# real jets

class Jet:
    """Real truncated Taylor series (possibly a table/batch of them)."""

    __array_ufunc__ = None
    __slots__ = ("coeffs", "m", "order", "point")

    def __init__(self, coeffs: np.ndarray, m: int, order: int, point=None):
        if coeffs.shape[-1] != size(m, order):
            raise ValueError("coefficient vector does not match (m, order)")
        self.coeffs = coeffs
        self.m = m
        self.order = order
        self.point = point

    # -- basic properties
    @property
    def mode(self) -> str:
        return mode_of(self.coeffs)

    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def coeff(self, alpha: Sequence[int]):
        """Normalized coefficient d^alpha f / alpha! (array over shape)."""
        return self.coeffs[..., tables(self.m, self.order).index[tuple(alpha)]]

    def derivative(self, alpha: Sequence[int]):
        """The partial derivative d^alpha f at the base point."""
        fac = math.prod(math.factorial(a) for a in alpha)
        return self.coeff(alpha) * fac

    def _like(self, coeffs, order=None):
        return Jet(coeffs, self.m, self.order if order is None else order, self.point)

    def truncate(self, K: int) -> "Jet":
        if K > self.order:
            raise ValueError("cannot raise the order of a jet")
        if K == self.order:
            return self
        return self._like(self.coeffs[..., : size(self.m, K)], K)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if Ellipsis not in key:
            key = key + (Ellipsis,)
        return self._like(self.coeffs[key + (slice(None),)])

    def __len__(self):
        return self.shape[0]

    def __repr__(self):
        return f"Jet(m={self.m}, order={self.order}, shape={self.shape}, mode={self.mode})"

    # -- compatibility
    def _check(self, other: "Jet"):
        if self.m != other.m:
            raise ValueError("jets live in different numbers of variables")
        if self.mode != other.mode:
            raise ValueError("mixing exact and float jets")
        if (self.point is not None and other.point is not None
                and self.point is not other.point
                and (np.shape(self.point) != np.shape(other.point)
                     or not np.array_equal(self.point, other.point))):
            raise ValueError("jets expanded at different base points")

    def _pair(self, other: "Jet"):
        self._check(other)
        K = min(self.order, other.order)
        return self.truncate(K), other.truncate(K), K

    def _scalar(self, x):
        if isinstance(x, np.ndarray):
            return as_array(x, self.mode)[..., None]
        return to_scalar(x, self.mode)

    # -- arithmetic
    def __neg__(self):
        return self._like(-self.coeffs)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, ComplexJet):
            return NotImplemented
        if isinstance(other, Jet):
            a, b, K = self._pair(other)
            return Jet(a.coeffs + b.coeffs, self.m, K, _pt(self, other))
        c = np.array(self.coeffs, copy=True)
        s = self._scalar(other)
        if isinstance(s, np.ndarray):
            c = c + np.concatenate([s, zeros(s.shape[:-1] + (c.shape[-1] - 1,), self.mode)], -1)
        else:
            c[..., 0] = c[..., 0] + s
        return self._like(c)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ComplexJet):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ComplexJet):
            return NotImplemented
        if isinstance(other, Jet):
            a, b, K = self._pair(other)
            out = _convolve(a.coeffs, b.coeffs, tables(self.m, K))
            return Jet(out, self.m, K, _pt(self, other))
        return self._like(self.coeffs * self._scalar(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ComplexJet):
            return NotImplemented
        if isinstance(other, Jet):
            return self * other.reciprocal()
        s = self._scalar(other)
        if not isinstance(s, np.ndarray) and s == 0:
            raise ZeroDivisionError("division of a jet by zero")
        return self._like(self.coeffs / s) if self.mode == FLOAT else self._like(self.coeffs * (1 / s))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only nonnegative integer powers")
        out = self.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def one(self) -> "Jet":
        c = zeros(self.coeffs.shape, self.mode)
        c[..., 0] = to_scalar(1, self.mode)
        return self._like(c)

    def zero(self) -> "Jet":
        return self._like(zeros(self.coeffs.shape, self.mode))

    def conj(self) -> "Jet":
        return self

    # -- composition with univariate functions
    def _compose(self, taylor: Callable[[np.ndarray, int], list]) -> "Jet":
        """f(self) given taylor(b0, K) = [f(b0), f'(b0), f''(b0)/2!, ...]."""
        b0 = self.value
        beta = np.array(self.coeffs, copy=True)
        beta[..., 0] = to_scalar(0, self.mode)
        beta = self._like(beta)
        fk = taylor(b0, self.order)
        out = self._const(fk[self.order])
        for k in range(self.order - 1, -1, -1):
            out = beta * out + self._const(fk[k])
        return out

    def _const(self, val) -> "Jet":
        c = zeros(self.coeffs.shape, self.mode)
        c[..., 0] = val
        return self._like(c)

    def reciprocal(self) -> "Jet":
        b0 = self.value
        if np.any(b0 == 0):
            raise ZeroDivisionError("jet division by a value that vanishes at the base point")

        def taylor(b0, K):
            inv = 1 / b0 if self.mode == FLOAT else _map(lambda v: 1 / v, b0)
            out, p = [], inv
            for k in range(K + 1):
                out.append(p if k % 2 == 0 else -p)
                p = p * inv
            return out

        return self._compose(taylor)

    def sqrt(self) -> "Jet":
        b0 = self.value
        if np.any(b0 <= 0):
            raise ValueError("jet sqrt of a value that is not positive at the base point")

        def taylor(b0, K):
            root = np.sqrt(b0) if self.mode == FLOAT else _map(_rational_sqrt, b0)
            inv = 1 / b0 if self.mode == FLOAT else _map(lambda v: 1 / v, b0)
            out, p = [], root
            half = to_scalar(Fraction(1, 2), self.mode)
            binom = to_scalar(1, self.mode)
            for k in range(K + 1):
                out.append(binom * p)
                binom = binom * (half - k) / (k + 1)
                p = p * inv
            return out

        return self._compose(taylor)

    def exp(self) -> "Jet":
        b0 = self.value
        if self.mode == EXACT and np.any(b0 != 0):
            raise ValueError("exp of a nonzero rational is irrational; use float mode")

        def taylor(b0, K):
            e = np.exp(b0) if self.mode == FLOAT else _map(lambda v: mpq(1), b0)
            return [e / math.factorial(k) if self.mode == FLOAT else e * mpq(1, math.factorial(k))
                    for k in range(K + 1)]

        return self._compose(taylor)

    def _trig(self, phase: int) -> "Jet":
        b0 = self.value
        if self.mode == EXACT and np.any(b0 != 0):
            raise ValueError("sin/cos of a nonzero rational is irrational; use float mode")

        def taylor(b0, K):
            if self.mode == FLOAT:
                cyc = [np.sin(b0), np.cos(b0), -np.sin(b0), -np.cos(b0)]
                return [cyc[(k + phase) % 4] / math.factorial(k) for k in range(K + 1)]
            cyc = [0, 1, 0, -1]
            return [_map(lambda v, k=k: mpq(cyc[(k + phase) % 4], math.factorial(k)), b0)
                    for k in range(K + 1)]

        return self._compose(taylor)

    def sin(self) -> "Jet":
        return self._trig(0)

    def cos(self) -> "Jet":
        return self._trig(1)

    # -- differentiation
    def partial(self, d: int) -> "Jet":
        """d/dx_d, an order K-1 jet: c'[a] = (a_d + 1) c[a + e_d]."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        if not 0 <= d < self.m:
            raise IndexError("direction out of range")
        t = tables(self.m, self.order)
        c = self.coeffs[..., t.dsrc[d]] * as_array(t.dfac[d], self.mode)
        return self._like(c, self.order - 1)

    def grad(self) -> "Jet":
        """All first partials, stacked on a new trailing table axis."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        t = tables(self.m, self.order)
        src = np.stack(t.dsrc)            # (m, N')
        fac = as_array(np.stack(t.dfac), self.mode)
        c = self.coeffs[..., src] * fac   # shape + (m, N')
        return self._like(c, self.order - 1)

    def sum(self, axis) -> "Jet":
        axes = axis if isinstance(axis, tuple) else (axis,)
        nd = len(self.shape)
        axes = tuple(a % nd for a in axes)
        return self._like(self.coeffs.sum(axis=axes))


def _pt(a, b):
    return a.point if a.point is not None else b.point


def _map(fn, arr):
    arr = np.asarray(arr, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = fn(v)
    return out


# ---------------------------------------------------------------------------
# complex jets

class ComplexJet:
    """A complex-valued jet stored as a pair of real jets."""

    __array_ufunc__ = None
    __slots__ = ("re", "im")

    def __init__(self, re: Jet, im: Jet | None = None):
        if im is None:
            im = re.zero()
        if re.shape != im.shape or re.order != im.order:
            K = min(re.order, im.order)
            re, im = re.truncate(K), im.truncate(K)
            shape = np.broadcast_shapes(re.shape, im.shape)
            re = Jet(np.broadcast_to(re.coeffs, shape + re.coeffs.shape[-1:]), re.m, K, re.point)
            im = Jet(np.broadcast_to(im.coeffs, shape + im.coeffs.shape[-1:]), im.m, K, im.point)
        self.re = re
        self.im = im

    @property
    def mode(self):
        return self.re.mode

    @property
    def shape(self):
        return self.re.shape

    @property
    def order(self):
        return self.re.order

    @property
    def m(self):
        return self.re.m

    @property
    def point(self):
        return self.re.point

    @property
    def value(self):
        """Complex value array (float mode) or (re, im) pair (exact mode)."""
        if self.mode == FLOAT:
            return self.re.value + 1j * self.im.value
        return self.re.value, self.im.value

    def __repr__(self):
        return f"ComplexJet(m={self.m}, order={self.order}, shape={self.shape}, mode={self.mode})"

    def truncate(self, K):
        return ComplexJet(self.re.truncate(K), self.im.truncate(K))

    def __getitem__(self, key):
        return ComplexJet(self.re[key], self.im[key])

    def conj(self):
        return ComplexJet(self.re, -self.im)

    def mul_i(self):
        return ComplexJet(-self.im, self.re)

    def abs2(self) -> Jet:
        return self.re * self.re + self.im * self.im

    def __neg__(self):
        return ComplexJet(-self.re, -self.im)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, ComplexJet):
            return ComplexJet(self.re + other.re, self.im + other.im)
        if isinstance(other, Jet):
            return ComplexJet(self.re + other, self.im + other.zero())
        if isinstance(other, complex):
            return ComplexJet(self.re + other.real, self.im + other.imag)
        return ComplexJet(self.re + other, self.im + 0)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ComplexJet):
            a, b, c, d = self.re, self.im, other.re, other.im
            k1 = c * (a + b)
            k2 = a * (d - c)
            k3 = b * (c + d)
            return ComplexJet(k1 - k3, k1 + k2)
        if isinstance(other, complex):
            if self.mode == EXACT:
                raise TypeError("use mul_i and rational factors in exact mode")
            return ComplexJet(self.re * other.real - self.im * other.imag,
                              self.re * other.imag + self.im * other.real)
        if isinstance(other, np.ndarray) and np.iscomplexobj(other):
            return ComplexJet(self.re * other.real - self.im * other.imag,
                              self.re * other.imag + self.im * other.real)
        return ComplexJet(self.re * other, self.im * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ComplexJet):
            return self * other.conj() * other.abs2().reciprocal()
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return ComplexJet(self.re / other, self.im / other)

    def __rtruediv__(self, other):
        return (ComplexJet(self.re.one()) * other) / self

    def sqrt(self):
        if np.any(self.im.value != 0):
            raise ValueError("complex sqrt is only supported for real-valued jets")
        return ComplexJet(self.re.sqrt())

    def partial(self, d):
        return ComplexJet(self.re.partial(d), self.im.partial(d))

    def grad(self):
        return ComplexJet(self.re.grad(), self.im.grad())

    def sum(self, axis):
        return ComplexJet(self.re.sum(axis), self.im.sum(axis))

    def max_abs(self):
        """Largest |coefficient| over every entry and degree (for residuals)."""
        return max(max_abs(self.re.coeffs), max_abs(self.im.coeffs))


def max_abs(arr: np.ndarray):
    if not isinstance(arr, np.ndarray):
        arr = np.asarray(arr, dtype=object if type(arr) is type(mpq(0)) else None)
    if arr.size == 0:
        return 0.0 if arr.dtype != object else mpq(0)
    if arr.dtype == object:
        return max(abs(v) for v in arr.ravel())
    return float(np.max(np.abs(arr)))


# ---------------------------------------------------------------------------
# construction helpers

def variables(p, K: int, mode: str | None = None) -> list[Jet]:
    """Coordinate jets x_1..x_m at the point(s) ``p`` (shape (..., m))."""
    if mode is None:
        mode = mode_of(np.asarray(p)) if np.asarray(p).dtype == object else FLOAT
    p = as_array(p, mode)
    m = p.shape[-1]
    N = size(m, K)
    out = []
    for i in range(m):
        c = zeros(p.shape[:-1] + (N,), mode)
        c[..., 0] = p[..., i]
        if K >= 1:
            c[..., 1 + i] = to_scalar(1, mode)
        out.append(Jet(c, m, K, p))
    return out


def constant(value, like: Jet) -> Jet:
    c = zeros(like.coeffs.shape[:-1] + (size(like.m, like.order),), like.mode)
    c[..., 0] = to_scalar(value, like.mode) if not isinstance(value, np.ndarray) else as_array(value, like.mode)
    return Jet(c, like.m, like.order, like.point)


def jet_lift(expr: Callable, p, K: int, mode: str | None = None):
    """Order-K Taylor expansion of ``expr(x)`` at ``p``.

    ``expr`` receives the list of coordinate jets and may use +, -, *, /,
    integer powers and the module functions :func:`sqrt`, :func:`exp`,
    :func:`sin`, :func:`cos`.
    """
    xs = variables(p, K, mode)
    out = expr(xs)
    if isinstance(out, (Jet, ComplexJet)):
        return out
    return constant(out, xs[0])


def stack(items, like: Jet, axis: int | None = None):
    """Stack a nested list of jets/numbers into one table-shaped jet.

    ``like`` supplies the variables, order and batch shape; nested lists
    become trailing table axes (``items[i][j]`` lands at ``[..., i, j]``).
    """
    def conv(x):
        if isinstance(x, (list, tuple)):
            return stack(x, like)
        if isinstance(x, (Jet, ComplexJet)):
            return x
        return constant(x, like)

    parts = [conv(x) for x in items]
    cplx = any(isinstance(x, ComplexJet) for x in parts)
    if cplx:
        parts = [x if isinstance(x, ComplexJet) else ComplexJet(x) for x in parts]
        if axis is None:
            axis = -(len(parts[0].shape) - len(like.shape)) - 1
        return ComplexJet(stack([x.re for x in parts], like, axis),
                          stack([x.im for x in parts], like, axis))
    K = min(x.order for x in parts)
    parts = [x.truncate(K) for x in parts]
    shape = np.broadcast_shapes(*[x.shape for x in parts])
    N = size(like.m, K)
    arrs = [np.broadcast_to(x.coeffs, shape + (N,)) for x in parts]
    if axis is None:
        axis = -(len(shape) - len(like.shape)) - 1
    ax = axis if axis >= 0 else axis - 1
    return Jet(np.stack(arrs, axis=ax), like.m, K, like.point)


def _unary(name):
    def fn(x):
        if isinstance(x, (Jet, ComplexJet)):
            return getattr(x, name)()
        if isinstance(x, (Fraction, Rational)) or type(x) is type(mpq(0)):
            if name == "sqrt":
                return _rational_sqrt(x)
            if x == 0:
                return {"exp": mpq(1), "sin": mpq(0), "cos": mpq(1)}[name]
        return getattr(math, name)(x)
    fn.__name__ = name
    fn.__doc__ = f"{name} that works on numbers and jets."
    return fn


sqrt = _unary("sqrt")
exp = _unary("exp")
sin = _unary("sin")
cos = _unary("cos")


# ---------------------------------------------------------------------------
# index contraction

def _split(subscripts: str):
    lhs, out = subscripts.replace(" ", "").split("->")
    return lhs.split(","), out


def _letters(s: str) -> str:
    return s.replace("...", "")


def _real_ein(sa: str, sb: str, so: str, a: Jet, b: Jet) -> Jet:
    a, b, K = a._pair(b)
    t = tables(a.m, K)
    A = a.coeffs[..., t.I]
    B = b.coeffs[..., t.J]
    prod = np.einsum(f"{sa}z,{sb}z->{so}z", A, B)
    return Jet(np.add.reduceat(prod, t.starts, axis=-1), a.m, K, _pt(a, b))


def _ein2(sa, sb, so, a, b):
    ca, cb = isinstance(a, ComplexJet), isinstance(b, ComplexJet)
    if not ca and not cb:
        return _real_ein(sa, sb, so, a, b)
    if ca and not cb:
        return ComplexJet(_real_ein(sa, sb, so, a.re, b), _real_ein(sa, sb, so, a.im, b))
    if cb and not ca:
        return ComplexJet(_real_ein(sa, sb, so, a, b.re), _real_ein(sa, sb, so, a, b.im))
    rr = _real_ein(sa, sb, so, a.re, b.re)
    ii = _real_ein(sa, sb, so, a.im, b.im)
    ri = _real_ein(sa, sb, so, a.re, b.im)
    ir = _real_ein(sa, sb, so, a.im, b.re)
    return ComplexJet(rr - ii, ri + ir)


def _ein1(s, so, a):
    if isinstance(a, ComplexJet):
        return ComplexJet(_ein1(s, so, a.re), _ein1(s, so, a.im))
    return a._like(np.einsum(f"{s}z->{so}z", a.coeffs))


def cein(subscripts: str, *ops):
    """Einstein summation over the table axes of (complex) jets.

    Products are truncated Cauchy products; ``'...'`` broadcasts over
    leading batch axes exactly as in :func:`numpy.einsum`.  The letter
    ``z`` is reserved.
    """
    ins, out = _split(subscripts)
    if len(ins) != len(ops):
        raise ValueError("operand count does not match subscripts")
    if "z" in subscripts:
        raise ValueError("subscript letter 'z' is reserved")
    if len(ops) == 1:
        return _ein1(ins[0], out, ops[0])
    ell = any("..." in s for s in ins)
    cur, scur = ops[0], ins[0]
    for k in range(1, len(ops)):
        later = "".join(_letters(s) for s in ins[k + 1:]) + _letters(out)
        if k == len(ops) - 1:
            snext = out
        else:
            seen = []
            for ch in _letters(scur) + _letters(ins[k]):
                if ch in later and ch not in seen:
                    seen.append(ch)
            snext = ("..." if ell else "") + "".join(seen)
        cur = _ein2(scur, ins[k], snext, cur, ops[k])
        scur = snext
    return cur

"""Contact Riemannian model manifolds and their orthonormal complex frames.

A model is given on a single chart by the component functions of the
contact form theta, the Reeb field T, the metric h and the (1,1)-tensor J.
Component functions are plain Python callables of the coordinate list, so
they can be evaluated on floats, rationals or jets alike.

Conventions (used everywhere in the package):

* wedge:  (phi ^ psi)(X, Y) = (phi(X) psi(Y) - psi(X) phi(Y)) / 2
* exterior derivative:  2 dphi(X, Y) = X phi(Y) - Y phi(X) - phi([X, Y])

so in coordinates dtheta(X, Y) = X^i Y^j F_ij / 2 with
F_ij = d_i theta_j - d_j theta_i.

Frame index layout: 0 is T, 1..n are W_alpha in T^(1,0) and n+1..2n are
their conjugates, so the conjugate of index a is ``conj_index(n)[a]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import jets
from .jets import EXACT, FLOAT, ComplexJet, Jet, cein


# ---------------------------------------------------------------------------
# index helpers

def conj_index(n: int) -> np.ndarray:
    """Permutation sending a frame index to the index of its conjugate."""
    return np.r_[0, np.arange(n + 1, 2 * n + 1), np.arange(1, n + 1)]


def hol(n: int) -> slice:
    return slice(1, n + 1)


def antihol(n: int) -> slice:
    return slice(n + 1, 2 * n + 1)


def gram_normal_form(n: int, mode: str) -> np.ndarray:
    """h(W_j, W_k) in the normalized frame: a permutation matrix."""
    G = jets.zeros((2 * n + 1, 2 * n + 1), mode)
    ci = conj_index(n)
    for j in range(2 * n + 1):
        G[j, ci[j]] = jets.to_scalar(1, mode)
    return G


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class ContactModel:
    """Chart description of (M, theta, h, J, T).

    ``theta``/``reeb`` map a coordinate list to a list of m components,
    ``metric``/``almost_complex`` to m x m nested lists (``J[i][j]`` is
    J^i_j, the i-th component of J applied to the j-th chart field).
    """

    name: str
    n: int
    theta: Callable
    reeb: Callable
    metric: Callable
    almost_complex: Callable
    smooth_class: str = "polynomial"
    integration_profile: str = "none"
    rational_seeds: Callable | None = None
    sampler: Callable | None = None
    params: dict = field(default_factory=dict)

    @property
    def chart_dim(self) -> int:
        return 2 * self.n + 1

    def sample_points(self, rng: np.random.Generator, count: int, mode: str = FLOAT) -> np.ndarray:
        """Random chart points; rationals with small denominators in exact mode."""
        if self.sampler is not None:
            return self.sampler(rng, count, mode)
        return _make_box_sampler(self.chart_dim)(rng, count, mode)

    def with_fields(self, **changes) -> "ContactModel":
        """Copy of the model with some component callables replaced."""
        from dataclasses import replace
        return replace(self, **changes)


def _make_box_sampler(m: int, half_width: int = 1):
    def sample(rng, count, mode=FLOAT):
        if mode == EXACT:
            den = rng.integers(1, 9, size=(count, m))
            num = rng.integers(-den * half_width, den * half_width + 1)
            pts = np.empty((count, m), dtype=object)
            for idx in np.ndindex(count, m):
                pts[idx] = jets.mpq(int(num[idx]), int(den[idx]))
            return pts
        return rng.uniform(-half_width, half_width, size=(count, m))
    return sample


def _omega(n: int) -> np.ndarray:
    """dtheta on the horizontal basis (X~_1..X~_n, Y~_1..Y~_n)."""
    O = np.zeros((2 * n, 2 * n), dtype=int)
    O[:n, n:] = np.eye(n, dtype=int)
    O[n:, :n] = -np.eye(n, dtype=int)
    return O


def _heisenberg_type(n: int, JE: Callable, name: str, params: dict, S: Callable | None) -> ContactModel:
    """Model with the Heisenberg contact form and a horizontal J given by
    ``JE(x)`` (2n x 2n nested list) in the basis of lifted fields."""
    m = 2 * n + 1
    Om = _omega(n)

    def theta(x):
        return [-x[n + a] for a in range(n)] + [x[a] for a in range(n)] + [1]

    def reeb(x):
        return [0] * (2 * n) + [1]

    def lift_col(x, a):
        # coordinates of the lifted field E_a = d_a + theta-correction d_t
        col = [0] * m
        col[a] = 1
        col[2 * n] = x[n + a] if a < n else -x[a - n]
        return col

    def almost_complex(x):
        je = JE(x)
        out = [[0] * m for _ in range(m)]
        for j in range(2 * n):
            for a in range(2 * n):
                coef = je[a][j]
                if isinstance(coef, int) and coef == 0:
                    continue
                col = lift_col(x, a)
                for i in range(m):
                    if not (isinstance(col[i], int) and col[i] == 0):
                        out[i][j] = out[i][j] + col[i] * coef
        return out

    def metric(x):
        je = JE(x)
        th = theta(x)
        out = [[None] * m for _ in range(m)]
        for i in range(m):
            for j in range(m):
                val = th[i] * th[j]
                if i < 2 * n and j < 2 * n:
                    # H = -Omega J_E
                    for k in range(2 * n):
                        if Om[i, k]:
                            val = val - Om[i, k] * je[k][j]
                out[i][j] = val
        return out

    def rational_seeds(x):
        seeds = []
        for a in range(n):
            v = [0] * (2 * n)
            v[a] = 1
            v[n + a] = 1
            if S is not None:
                s = S(x)
                v = [sum(s[r][c] * v[c] for c in range(2 * n)) for r in range(2 * n)]
            vec = [0] * m
            for b in range(2 * n):
                col = lift_col(x, b)
                for i in range(m):
                    vec[i] = vec[i] + col[i] * v[b]
            seeds.append(vec)
        return seeds

    return ContactModel(name=name, n=n, theta=theta, reeb=reeb, metric=metric,
                        almost_complex=almost_complex, smooth_class="polynomial",
                        integration_profile="gauss_hermite_weighted",
                        rational_seeds=rational_seeds, sampler=_make_box_sampler(m),
                        params=params)


def _J0(n: int) -> list:
    # J0 X~_a = -Y~_a, J0 Y~_a = X~_a; as a matrix this equals Omega
    return _omega(n).tolist()


def make_heisenberg(n: int) -> ContactModel:
    """Heisenberg group with theta = dt + sum(x dy - y dx), T = d_t and
    J X~_a = -Y~_a, J Y~_a = X~_a (which makes h(X~, X~) = 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    J0 = _J0(n)
    return _heisenberg_type(n, lambda x: J0, "heisenberg", {"n": n}, None)


def default_shear(n: int) -> np.ndarray:
    """Nilpotent symplectic shear sending X~_1 to Y~_2 and X~_2 to Y~_1."""
    N = np.zeros((2 * n, 2 * n), dtype=int)
    B = np.zeros((n, n), dtype=int)
    B[0, 1] = B[1, 0] = 1
    N[n:, :n] = B
    return N


SHEAR_PROFILES = {
    "x1": lambda x: x[0],
    # depends on the Reeb coordinate, so L_T J != 0 and the Webster torsion is live
    "x1+t": lambda x: x[0] + x[-1],
}


def make_perturbed_heisenberg(n: int = 2, eps=Fraction(1, 10), profile: Callable | str | None = None,
                              shear: np.ndarray | None = None) -> ContactModel:
    """Heisenberg contact form with the non-integrable J' = S J0 S^-1,
    S = I + eps s(p) N, N^2 = 0 and N infinitesimally symplectic.

    ``profile`` is s (a callable on coordinate lists) or a key of SHEAR_PROFILES."""
    if n < 2:
        raise ValueError("n must be >= 2")
    N = default_shear(n) if shear is None else np.asarray(shear)
    if N.shape != (2 * n, 2 * n):
        raise ValueError("shear must be 2n x 2n")
    if np.any(N @ N != 0):
        raise ValueError("shear must satisfy N^2 = 0")
    Om = _omega(n)
    if np.any(N.T @ Om + Om @ N != 0):
        raise ValueError("shear is not infinitesimally symplectic for dtheta")
    if profile is None:
        profile = "x1"
    name = profile if isinstance(profile, str) else None
    if name is not None:
        if name not in SHEAR_PROFILES:
            raise ValueError(f"unknown shear profile {name!r}")
        profile = SHEAR_PROFILES[name]
    probe = [0.3, -0.2] + [0.1] * (2 * n - 2)
    t_invariant = float(profile(probe + [0.0]) - profile(probe + [0.7])) == 0.0
    eps = Fraction(eps) if not isinstance(eps, float) else eps
    Nl = N.tolist()
    J0 = _J0(n)

    def matmul(A, B):
        size_ = len(A)
        out = []
        for r in range(size_):
            row = []
            for c in range(size_):
                acc = 0
                for k in range(size_):
                    a, b = A[r][k], B[k][c]
                    if (isinstance(a, int) and a == 0) or (isinstance(b, int) and b == 0):
                        continue
                    acc = acc + a * b
                row.append(acc)
            out.append(row)
        return out

    def S_of(x, sign=1):
        s = profile(x)
        return [[(1 if r == c else 0) + (sign * eps * s * Nl[r][c] if Nl[r][c] else 0)
                 for c in range(2 * n)] for r in range(2 * n)]

    def JE(x):
        return matmul(matmul(S_of(x), J0), S_of(x, -1))

    model = _heisenberg_type(n, JE, "perturbed_heisenberg",
                             {"n": n, "eps": eps, "shear": N.tolist(), "profile": name,
                              "t_invariant": t_invariant}, S_of)
    # positivity probe: h' = S^-T S^-1 on HM, check on a small grid
    if not isinstance(eps, float) or eps != 0:
        rng = np.random.default_rng(0)
        for p in rng.uniform(-2, 2, size=(16, 2 * n + 1)):
            H = np.array(model.metric(list(p)), dtype=float)
            if np.linalg.eigvalsh(H).min() <= 0:
                raise ValueError("perturbed metric is not positive definite; reduce eps")
    return model


def make_sphere(n: int = 2, scale=1) -> ContactModel:
    """Unit sphere S^{2n+1} in C^{n+1} in a stereographic chart.

    theta = sum(x dy - y dx), T = sum(-y d_x + x d_y), J = -i on the
    horizontal bundle (the sign forced by positivity of h), h = round
    metric.  ``scale`` c replaces (theta, T, h) by
    (c theta, T / c, c h + (c^2 - c) theta^2).
    """
    if n < 2:
        raise ValueError("the sphere model requires n >= 2")
    m = 2 * n + 1
    M = 2 * n + 2

    def ambient(x):
        r2 = sum(xi * xi for xi in x)
        inv = 1 / (1 + r2)
        P = [2 * xi * inv for xi in x] + [(r2 - 1) * inv]
        inv2 = inv * inv
        DP = [[(2 * inv if A == i else 0) - 4 * x[A] * x[i] * inv2 for i in range(m)]
              for A in range(m)]
        DP.append([4 * x[i] * inv2 for i in range(m)])
        lam2 = 4 * inv2
        return P, DP, lam2

    def times_i(v):
        # (x, y) -> (-y, x) on C^{n+1} with ordering (x^0..x^n, y^0..y^n)
        h = n + 1
        return [-v[h + j] for j in range(h)] + [v[j] for j in range(h)]

    def base(x):
        P, DP, lam2 = ambient(x)
        Tamb = times_i(P)
        th = [sum(Tamb[A] * DP[A][i] for A in range(M)) for i in range(m)]
        return P, DP, lam2, Tamb, th

    def theta(x):
        return [scale * t for t in base(x)[4]]

    def reeb(x):
        _, _, lam2, _, th = base(x)
        return [t / lam2 / scale for t in th]

    def metric(x):
        _, _, lam2, _, th = base(x)
        return [[(scale * lam2 if i == j else 0) + (scale * scale - scale) * th[i] * th[j]
                 for j in range(m)] for i in range(m)]

    def almost_complex(x):
        _, DP, lam2, Tamb, th = base(x)
        out = [[None] * m for _ in range(m)]
        for j in range(m):
            VH = [DP[A][j] - th[j] * Tamb[A] for A in range(M)]
            JV = [-c for c in times_i(VH)]
            for i in range(m):
                out[i][j] = sum(DP[A][i] * JV[A] for A in range(M)) / lam2
        return out

    def sampler(rng, count, mode=FLOAT):
        if mode == EXACT:
            raise ValueError("the sphere model is float-only")
        pts = []
        while len(pts) < count:
            p = rng.uniform(-0.9, 0.9, size=m)
            if p @ p <= 0.81:
                pts.append(p)
        return np.array(pts)

    return ContactModel(name="sphere", n=n, theta=theta, reeb=reeb, metric=metric,
                        almost_complex=almost_complex, smooth_class="analytic",
                        integration_profile="sphere_moments", rational_seeds=None,
                        sampler=sampler, params={"n": n, "scale": scale})


def stereographic(w: np.ndarray) -> np.ndarray:
    """Ambient point of the sphere chart (last ambient coordinate = pole axis)."""
    w = np.asarray(w, dtype=float)
    r2 = np.sum(w * w, axis=-1, keepdims=True)
    return np.concatenate([2 * w, r2 - 1], axis=-1) / (1 + r2)


def make_model(name: str, n: int = 2, eps=Fraction(1, 10), **kw) -> ContactModel:
    if name == "heisenberg":
        return make_heisenberg(n)
    if name == "perturbed_heisenberg":
        return make_perturbed_heisenberg(n, eps, **kw)
    if name == "sphere":
        return make_sphere(n, **kw)
    raise ValueError(f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# lifted fields

@dataclass
class Fields:
    """Coordinate components of theta, T, h, J as jets, plus F = d theta."""

    theta: Jet      # (m,)
    reeb: Jet       # (m,)
    metric: Jet     # (m, m)
    J: Jet          # (m, m), J[i, j] = J^i_j
    F: Jet          # (m, m), F[i, j] = d_i theta_j - d_j theta_i, order K-1


def lift_fields(model: ContactModel, p, K: int, mode: str) -> Fields:
    xs = jets.variables(p, K, mode)
    like = xs[0]
    th = jets.stack(model.theta(xs), like)
    T = jets.stack(model.reeb(xs), like)
    h = jets.stack(model.metric(xs), like)
    J = jets.stack(model.almost_complex(xs), like)
    dth = th.grad()                               # [j, i] = d_i theta_j
    F = cein("...ji->...ij", dth) - dth
    return Fields(th, T, h, J, F)


# ---------------------------------------------------------------------------
# contact axioms

def _max(arr):
    return jets.max_abs(arr)


def verify_contact_axioms(model: ContactModel, p, mode: str = EXACT) -> dict:
    """Max residual per family of the compatibility equations at ``p``.

    Families: theta(T) = 1, T -| dtheta = 0, h(X, T) = theta(X),
    J^2 = -Id + theta (x) T, dtheta(X, Y) = h(X, JY), JT = 0,
    theta o J = 0, h(JX, JY) = h(X, Y) - theta(X) theta(Y) and symmetry
    of h, all on chart basis fields.
    """
    p = jets.as_array(p, mode)
    if p.shape[-1] != model.chart_dim:
        raise ValueError("point has the wrong chart dimension")
    if not np.all(np.isfinite(np.asarray(p, dtype=float))):
        raise ValueError("point outside the chart")
    f = lift_fields(model, p, 1, mode)
    th, T, h, J, F = (x.truncate(0) for x in (f.theta, f.reeb, f.metric, f.J, f.F))
    one = jets.to_scalar(1, mode)
    half = jets.to_scalar(Fraction(1, 2), mode)
    eye = jets.as_array(np.eye(model.chart_dim, dtype=int), mode)
    out = {}
    out["reeb-normalization"] = _max(cein("...i,...i->...", th, T).value - one)
    out["reeb-contraction"] = _max(cein("...i,...ij->...j", T, F).value * half)
    out["metric-reeb"] = _max(cein("...ij,...j->...i", h, T).value - th.value)
    JJ = cein("...ik,...kj->...ij", J, J).value
    out["J-square"] = _max(JJ + eye - cein("...i,...j->...ij", T, th).value)
    hJ = cein("...ik,...kj->...ij", h, J).value
    out["dtheta-compatibility"] = _max(F.value * half - hJ)
    out["J-reeb"] = _max(cein("...ij,...j->...i", J, T).value)
    out["theta-J"] = _max(cein("...i,...ij->...j", th, J).value)
    hJJ = cein("...ki,...kl,...lj->...ij", J, h, J).value
    out["J-isometry"] = _max(hJJ - h.value + cein("...i,...j->...ij", th, th).value)
    out["metric-symmetry"] = _max(h.value - np.swapaxes(h.value, -1, -2))
    return out


# ---------------------------------------------------------------------------
# frames

class FrameError(ValueError):
    pass


@dataclass
class Frame:
    """Orthonormal frame {T, W_alpha, W_alphabar} near a point, as jets.

    ``W[..., j, i]`` is the i-th chart component of W_j, ``coframe[..., l, i]``
    the i-th component of theta^l, ``c[..., j, k, l]`` the structure functions
    [W_j, W_k] = c_jk^l W_l and ``Jf[..., j, l]`` the frame matrix of J
    (J W_j = Jf_j^l W_l).
    """

    model: ContactModel
    point: np.ndarray
    order: int
    mode: str
    fields: Fields
    X: Jet
    W: ComplexJet
    coframe: ComplexJet
    c: ComplexJet
    Jf: ComplexJet

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def dim(self) -> int:
        return 2 * self.model.n + 1

    def apply(self, f):
        """W_j f for all j: appends a frame axis to f's table shape."""
        sub = "abcdefgh"[: len(f.shape) - (self.point.ndim - 1)]
        return cein(f"...jd,...{sub}d->...{sub}j", self.W, f.grad())


def _hdot(X, h, Y):
    return cein("...i,...ij,...j->...", X, h, Y)


def _scale(s, X):
    return cein("...,...i->...i", s, X)


def chart_seeds(model: ContactModel):
    """Chart basis fields d_1, d_2, ... in order."""
    m = model.chart_dim

    def seeds(x):
        return [[1 if i == k else 0 for i in range(m)] for k in range(m)]
    return seeds


def build_frame(model: ContactModel, p, K: int = 3, mode: str = EXACT, seeds="auto") -> Frame:
    """Orthonormal complex frame at ``p`` with jet order K.

    X_1 is the first usable candidate projected to the horizontal bundle
    and normalized to h(X_1, X_1) = 1/2, X_{n+1} = J X_1, and later
    candidates are Gram-Schmidt orthogonalized against all previous X's.
    ``seeds`` is ``'chart'`` (chart basis fields in order), ``'rational'``
    (model-supplied candidates whose normalization needs no irrational
    square root), ``'auto'`` (rational in exact mode, chart otherwise) or a
    callable returning candidate vectors.
    """
    if K < 1:
        raise ValueError("frame order must be >= 1")
    n = model.n
    p = jets.as_array(p, mode)
    f = lift_fields(model, p, K, mode)
    if seeds == "auto":
        seeds = "rational" if (mode == EXACT and model.rational_seeds is not None) else "chart"
    if seeds == "chart":
        seeds = chart_seeds(model)
    elif seeds == "rational":
        if model.rational_seeds is None:
            raise ValueError(f"model {model.name} has no rational seeds")
        seeds = model.rational_seeds
    xs = jets.variables(p, K, mode)
    like = xs[0]
    cands = [jets.stack(v, like) for v in seeds(xs)]
    h, J, th, T = f.metric, f.J, f.theta, f.reeb
    X = []
    for C in cands:
        if len(X) == 2 * n:
            break
        Y = C - _scale(cein("...i,...i->...", th, C), T)
        for e in X:
            Y = Y - _scale(_hdot(Y, h, e) * 2, e)
        nrm = _hdot(Y, h, Y)
        v = nrm.value
        if mode == EXACT:
            if np.any(v == 0):
                continue
        elif np.min(np.abs(v)) < 1e-8:
            continue
        if np.any(v < 0):
            raise FrameError("horizontal metric is not positive definite")
        Xa = _scale((nrm * 2).reciprocal().sqrt(), Y)
        X.append(Xa)
        X.append(cein("...ij,...j->...i", J, Xa))
    if len(X) < 2 * n:
        raise FrameError("candidates do not span the horizontal bundle")
    # order X_1..X_n, X_{n+1}=J X_1, ...
    Xs = [X[2 * a] for a in range(n)] + [X[2 * a + 1] for a in range(n)]
    Xt = jets.stack(Xs, like)                              # (2n, m)
    Wa = ComplexJet(Xt[..., :n, :], -Xt[..., n:, :])
    Tj = ComplexJet(jets.stack([T], like))
    W = _concat_rows([Tj, Wa, Wa.conj()])
    coframe = cein("...ik,...lk->...li", h, W.conj())
    dW = W.grad()                                          # [j, i, d]
    A = cein("...jd,...kid->...jki", W, dW)
    bracket = A - cein("...jki->...kji", A)
    c = cein("...jki,...li->...jkl", bracket, coframe)
    Jf = cein("...li,...ik,...jk->...jl", coframe, J, W)
    return Frame(model, p, K, mode, f, Xt, W, coframe, c, Jf)


def _concat_rows(parts):
    re = np.concatenate([q.re.coeffs for q in parts], axis=-3)
    im = np.concatenate([q.im.coeffs for q in parts], axis=-3)
    r0 = parts[0].re
    return ComplexJet(Jet(re, r0.m, r0.order, r0.point), Jet(im, r0.m, r0.order, r0.point))


def frame_invariants(frame: Frame) -> dict:
    """Residuals of the normal form of the frame (values at the point)."""
    n, mode = frame.n, frame.mode
    f = frame.fields
    W = frame.W.truncate(0)
    G = gram_normal_form(n, mode)
    gram = cein("...ji,...ik,...lk->...jl", W, f.metric.truncate(0), W)
    out = {}
    out["gram"] = max(_max(gram.re.value - G), _max(gram.im.value))
    JW = cein("...ik,...jk->...ji", f.J.truncate(0), W)
    a, b = hol(n), antihol(n)
    r1 = JW[..., a, :] - W[..., a, :].mul_i()
    r2 = JW[..., b, :] + W[..., b, :].mul_i()
    out["J-eigen"] = max(r1.truncate(0).max_abs(), r2.truncate(0).max_abs())
    dual = cein("...li,...ji->...jl", frame.coframe.truncate(0), W)
    eye = jets.as_array(np.eye(2 * n + 1, dtype=int), mode)
    out["coframe-dual"] = max(_max(dual.re.value - eye), _max(dual.im.value))
    two_dth = cein("...ai,...bj,...ij->...ab", W, W, f.F.truncate(0))
    c0 = frame.c.truncate(0)[..., :, :, 0]
    res = c0 + two_dth
    out["bracket-theta"] = res[..., 1:, 1:].max_abs()
    anti = frame.c + cein("...jkl->...kjl", frame.c)
    out["bracket-antisymmetry"] = anti.max_abs()
    return out

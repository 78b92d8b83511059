"""Volume form, quadrature, and the global integral identities.

Heisenberg-type models are integrated with tensor Gauss-Hermite rules
against gaussian-enveloped test functions; their geometry does not depend
on the Reeb coordinate t, so frames and connection tables are built on the
(x, y) nodes only and repeated along t.  The sphere uses exact monomial
moments for polynomial integrands.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import calculus, jets
from .calculus import CovariantTable
from .connection import GeometryTables, geometry_tables, q_forms
from .geometry import ContactModel, Frame, antihol, build_frame, hol
from .jets import EXACT, FLOAT, ComplexJet, Jet, cein

TOL_INT = 1e-8
PROFILES = ("gauss_hermite_weighted", "sphere_moments", "monte_carlo")


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """How to realize integrals against dV.

    For ``gauss_hermite_weighted`` the rule integrates p(x) exp(-weight |x|^2)
    exactly for p of degree <= 2 order - 1 in each variable; ``weight`` must
    match the product of envelopes in the integrand (2c for bilinear
    expressions in c-enveloped test functions).
    """

    profile: str = "gauss_hermite_weighted"
    order: int = 7
    weight: float = 1.0
    samples: int = 20000
    seed: int = 0
    chunk: int = 3000

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise QuadratureError(f"unknown quadrature profile {self.profile!r}")
        if self.order < 1 or self.weight <= 0:
            raise QuadratureError("quadrature order and weight must be positive")

    @property
    def exactness_degree(self) -> int:
        return 2 * self.order - 1 if self.profile == "gauss_hermite_weighted" else -1


# ---------------------------------------------------------------------------
# volume form

def _det(M: np.ndarray):
    """Determinant of a square matrix (exact for object arrays)."""
    if M.dtype != object:
        return np.linalg.det(M)
    A = [list(r) for r in M]
    k = len(A)
    det = jets.to_scalar(1, EXACT)
    for c in range(k):
        piv = next((r for r in range(c, k) if A[r][c] != 0), None)
        if piv is None:
            return jets.to_scalar(0, EXACT)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det = det * A[c][c]
        for r in range(c + 1, k):
            f = A[r][c] / A[c][c]
            if f:
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return det


def volume_density(frame: Frame, cross_check: bool = True):
    """Chart density |theta ^ dtheta^n| at the frame point(s).

    Evaluated on the real frame (T, X_1..X_2n): the form equals
    n! Pf(dtheta(X_a, X_b)) there, divided by |det| of the frame in the
    chart.  With ``cross_check`` the value is compared against
    (-2)^n i^(n^2) n! theta ^ theta^1 ^ ... ^ theta^nbar from the coframe.
    """
    n, mode = frame.n, frame.mode
    X = frame.X.value                                  # (..., 2n, m)
    T = frame.fields.reeb.value
    F = frame.fields.F.value                           # components of dtheta
    E = np.concatenate([T[..., None, :], X], axis=-2)  # (..., m, m)
    batch = E.shape[:-2]
    flatE = E.reshape((-1,) + E.shape[-2:])
    flatX = X.reshape((-1,) + X.shape[-2:])
    flatF = F.reshape((-1,) + F.shape[-2:])
    cof = frame.coframe.truncate(0)
    cre, cim = (cof.value if mode == EXACT else (cof.value.real, cof.value.imag))
    cre = np.asarray(cre).reshape((-1,) + cre.shape[-2:])
    cim = np.asarray(cim).reshape((-1,) + cim.shape[-2:])
    out = []
    for k in range(flatE.shape[0]):
        Om = np.einsum("ai,ij,bj->ab", flatX[k], flatF[k], flatX[k])
        pf2 = _det(Om)
        dE = _det(flatE[k])
        if mode == EXACT:
            dens = jets.sqrt(pf2) * math.factorial(n) / abs(dE)
        else:
            dens = math.sqrt(max(pf2, 0.0)) * math.factorial(n) / abs(dE)
        if dens == 0:
            raise ValueError("degenerate contact form: volume density vanishes")
        if cross_check:
            alt = _coframe_density(cre[k], cim[k], n, mode)
            if (alt != dens) if mode == EXACT else abs(alt - dens) > 1e-9 * abs(dens):
                raise ValueError(f"volume density routes disagree: {dens} vs {alt}")
        out.append(dens)
    arr = np.array(out, dtype=object if mode == EXACT else float)
    return arr.reshape(batch) if batch else arr[0]


def _coframe_density(cre, cim, n: int, mode: str):
    if mode == EXACT:
        # the determinant of a complex matrix through its real 2x2 block form
        m = cre.shape[0]
        big = np.empty((2 * m, 2 * m), dtype=object)
        big[:m, :m], big[:m, m:], big[m:, :m], big[m:, m:] = cre, -cim, cim, cre
        # |det C|^2 = det of the real form
        d2 = _det(big)
        return jets.sqrt(d2) * (2 ** n) * math.factorial(n)
    d = np.linalg.det(cre + 1j * cim)
    val = (-2) ** n * (1j ** (n * n)) * math.factorial(n) * d
    return abs(val)


# ---------------------------------------------------------------------------
# quadrature rules

def hermite_rule(order: int, weight: float):
    """Nodes and weights for int g(x) exp(-weight x^2) dx on the line."""
    x, w = np.polynomial.hermite.hermgauss(order)
    s = 1.0 / math.sqrt(weight)
    return x * s, w * s


def sphere_moment(a, n: int) -> float:
    """int over the unit sphere S^(2n+1) of prod x_i^a_i (round measure)."""
    a = np.asarray(a)
    if np.any(a % 2):
        return 0.0
    N = 2 * n + 2
    if len(a) != N:
        raise ValueError("exponent length must be 2n + 2")
    logv = math.log(2) + float(np.sum(gammaln((a + 1) / 2))) - float(gammaln((a.sum() + N) / 2))
    return math.exp(logv)


def sphere_density_ratio(model: ContactModel, rng=None) -> float:
    """Constant dV / d(sigma) on the sphere model, from the chart densities."""
    if model.name != "sphere":
        raise QuadratureError("sphere_density_ratio needs the sphere model")
    rng = np.random.default_rng(0) if rng is None else rng
    p = model.sample_points(rng, 1)[0]
    fr = build_frame(model, p, 1, FLOAT)
    dV = volume_density(fr)
    r2 = float(p @ p)
    dsigma = (2.0 / (1 + r2)) ** model.chart_dim
    return dV / dsigma


def _grid(rules):
    xs = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), -1).reshape(-1, len(rules))
    ws = np.prod(np.stack(np.meshgrid(*[r[1] for r in rules], indexing="ij"), -1).reshape(-1, len(rules)), -1)
    return xs, ws


def _check_profile(model: ContactModel, quad: QuadratureSpec):
    if quad.profile == "monte_carlo":
        if model.name != "sphere":
            raise QuadratureError("monte_carlo is only set up for the compact sphere")
        return
    if quad.profile != model.integration_profile:
        raise QuadratureError(f"profile {quad.profile} does not fit model {model.name}")


def integrate(f, model: ContactModel, quad: QuadratureSpec):
    """int_M f dV.

    ``f`` is a callable on chart points (batch, m) for the Gauss-Hermite and
    Monte Carlo profiles, or an ambient polynomial {exponent: coefficient}
    for ``sphere_moments``.
    """
    _check_profile(model, quad)
    if quad.profile == "sphere_moments":
        if callable(f):
            raise QuadratureError("sphere_moments integrates ambient polynomials only")
        ratio = sphere_density_ratio(model)
        return ratio * sum(float(c) * sphere_moment(a, model.n) for a, c in f.items())
    if quad.profile == "monte_carlo":
        rng = np.random.default_rng(quad.seed)
        N = 2 * model.n + 2
        g = rng.normal(size=(quad.samples, N))
        P = g / np.linalg.norm(g, axis=1, keepdims=True)
        w = P[:, :-1] / (1 - P[:, -1:])                   # inverse stereographic
        area = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
        return sphere_density_ratio(model) * area * float(np.mean(f(w)))
    m = model.chart_dim
    xs, ws = _grid([hermite_rule(quad.order, quad.weight)] * m)
    fr = build_frame(model, xs[:1], 1, FLOAT, seeds="chart")
    dens = float(volume_density(fr)[0])
    vals = f(xs) * np.exp(quad.weight * np.sum(xs * xs, -1))
    return dens * np.sum(ws * vals)


# ---------------------------------------------------------------------------
# sweeps over Gauss-Hermite nodes with geometry shared along t

def _slim(frame: Frame, tables: GeometryTables):
    """Keep only the jet orders the integrands consume."""
    fr = dataclasses.replace(frame, W=frame.W.truncate(2), coframe=frame.coframe.truncate(0),
                             c=frame.c.truncate(0), Jf=frame.Jf.truncate(0))
    tb = dataclasses.replace(tables, frame=fr, Gamma=tables.Gamma.truncate(1), LC=tables.LC.truncate(0),
                             Q=tables.Q.truncate(0), QD=tables.QD.truncate(0), tau=tables.tau.truncate(0),
                             R=tables.R.truncate(0), Ric=tables.Ric.truncate(0))
    return fr, tb


def _repeat(obj, reps: int, point):
    if isinstance(obj, Jet):
        return Jet(np.repeat(obj.coeffs, reps, axis=0), obj.m, obj.order, point)
    if isinstance(obj, ComplexJet):
        return ComplexJet(_repeat(obj.re, reps, point), _repeat(obj.im, reps, point))
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type) and not isinstance(obj, ContactModel):
        changes = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, (Jet, ComplexJet)) or (dataclasses.is_dataclass(v) and not isinstance(v, ContactModel)):
                changes[f.name] = _repeat(v, reps, point)
        if isinstance(obj, Frame):
            changes["point"] = point
        return dataclasses.replace(obj, **changes)
    return obj


def _spread(frame: Frame, tables: GeometryTables, tnodes: np.ndarray):
    """Repeat t-independent geometry built at t = 0 along the t nodes."""
    q = len(tnodes)
    pts = np.repeat(frame.point, q, axis=0)
    pts[:, -1] = np.tile(tnodes, frame.point.shape[0])
    fr = _repeat(frame, q, pts)
    tb = _repeat(tables, q, pts)
    tb = dataclasses.replace(tb, frame=fr)
    return fr, tb


def _t_invariant(model: ContactModel) -> bool:
    return model.integration_profile == "gauss_hermite_weighted" and model.params.get("t_invariant", True)


def sweep(model: ContactModel, quad: QuadratureSpec, fields_: list, integrand: Callable) -> dict:
    """Integrate ``integrand(cts, frame, tables)`` over M.

    ``cts`` holds the covariant tables (no third derivatives) of every
    field in ``fields_``; the integrand returns {name: complex array} on the
    batch of nodes.  The exponential weight of the rule is divided out.
    """
    _check_profile(model, quad)
    if quad.profile != "gauss_hermite_weighted":
        raise QuadratureError("sweep needs the gauss_hermite_weighted profile")
    m = model.chart_dim
    x1, w1 = hermite_rule(quad.order, quad.weight)
    seeds = "rational" if model.rational_seeds else "chart"
    spread = _t_invariant(model)
    # t-invariant geometry is built on the (x, y) nodes and repeated along t
    xy, wxy = _grid([(x1, w1)] * (m - 1 if spread else m))
    q = len(x1) if spread else 1
    per = max(1, quad.chunk // q)
    dens = _constant_density(model)
    totals: dict = {}
    for s in range(0, len(xy), per):
        if spread:
            base = np.concatenate([xy[s:s + per], np.zeros((len(xy[s:s + per]), 1))], -1)
        else:
            base = xy[s:s + per]
        fr0 = build_frame(model, base, 3, FLOAT, seeds=seeds)
        tb0 = geometry_tables(fr0, check=False)
        fr0, tb0 = _slim(fr0, tb0)
        if spread:
            fr, tb = _spread(fr0, tb0, x1)
            wts = np.repeat(wxy[s:s + per], q) * np.tile(w1, len(base))
        else:
            fr, tb, wts = fr0, tb0, wxy[s:s + per]
        cts = [calculus.covariant_table(u, fr, tb, third=False) for u in fields_]
        vals = integrand(cts, fr, tb)
        env = np.exp(quad.weight * np.sum(fr.point * fr.point, -1))
        for k, v in vals.items():
            totals[k] = totals.get(k, 0) + np.sum(wts * env * v)
    return {k: dens * v for k, v in totals.items()}


def _constant_density(model: ContactModel) -> float:
    """Density of dV on a model whose contact form is the Heisenberg one
    (constant); checked at two chart points."""
    pts = np.array([[0.0] * model.chart_dim, [0.3, -0.7] + [0.4] * (model.chart_dim - 2)])
    d = [float(volume_density(build_frame(model, p, 1, FLOAT, seeds="chart"))) for p in pts]
    if abs(d[0] - d[1]) > 1e-12 * d[0]:
        raise QuadratureError("volume density is not constant on this model")
    return d[0]


# ---------------------------------------------------------------------------
# integrands

def _v(cj: ComplexJet):
    return cj.value


def identity_terms(ct: CovariantTable, tb: GeometryTables) -> dict:
    """Pointwise integrands of the global identities for one field u."""
    n = ct.n
    a, b = hol(n), antihol(n)
    d1, d2 = ct.d1.truncate(0), ct.d2.truncate(0)
    ua, ub = d1[..., a], d1[..., b]
    out = {}
    out["reeb"] = _v((cein("...a,...a->...", ua, d2[..., 0, b]) - cein("...a,...a->...", ub, d2[..., 0, a])).mul_i())
    out["mixed"] = _v(cein("...ab,...ab->...", d2[..., b, a], d2[..., a, b]))          # u_{abar b} u_{a bbar}
    out["pure"] = _v(cein("...ab,...ab->...", d2[..., a, a], d2[..., b, b]))           # u_{ab} u_{abar bbar}
    out["ricci"] = _v(cein("...ab,...a,...b->...", tb.Ric.truncate(0), ub, ua))
    # the horizontal trace R_alpha^beta_{gamma gammabar}
    htr = cein("...abgg->...ab", tb.R.truncate(0)[..., a, a, a, b])
    out["ricci-horizontal"] = _v(cein("...ab,...a,...b->...", htr, ub, ua))
    out.update({k: _v(v) for k, v in q_forms(tb, ub).items()})
    tr = cein("...aa->...", d2[..., a, b])
    out["trace2"] = _v(cein("...,...->...", tr, tr.conj()))                           # |sum u_{a abar}|^2
    lap = ct.sublap
    out["lap2"] = _v(cein("...,...->...", lap.truncate(0), lap.truncate(0)))
    G = tb.Gamma.truncate(0)
    out["gamma-hessian"] = _v(cein("...agb,...ag,...b->...", G[..., b, b, a], d2[..., a, a], ua))
    trB = cein("...gbaa->...gb", tb.QD.truncate(0)[..., b, b, a, a])                 # Q_{gbar bbar, a}^a
    out["qd-trace"] = _v(cein("...gb,...g,...b->...", trB, ua, ua).mul_i())
    dlap = ct.frame.apply(lap).truncate(0)
    out["grad-lap"] = _v(cein("...a,...a->...", ua, dlap[..., b]) + cein("...a,...a->...", ub, dlap[..., a]))
    out["u-lap"] = ct.u.value * _v(lap.truncate(0))
    out["energy"] = _v(cein("...a,...a->...", ua, ub))
    return out


def pair_terms(cu: CovariantTable, cv: CovariantTable, tb: GeometryTables) -> dict:
    """Both sides of the adjoint and Green identities for real u, v."""
    n = cu.n
    a, b = hol(n), antihol(n)
    du, dv = cu.d1.truncate(0), cv.d1.truncate(0)
    uval, vval = cu.u.value, cv.u.value
    # W_alpha^* = -W_alphabar + Gamma_{betabar beta}^alpha; v is real so conj(W_alphabar v) = v_alpha
    trG = _v(cein("...bba->...a", tb.Gamma.truncate(0)[..., b, a, a]))
    Wu, Wv = _v(du[..., a]), _v(dv[..., a])
    out = {}
    for al in range(n):
        out[f"W{al}-lhs"] = Wu[..., al] * vval
        out[f"W{al}-rhs"] = uval * (-Wv[..., al] + np.conj(trG[..., al]) * vval)
    out["iT-lhs"] = 1j * _v(du[..., 0]) * vval
    out["iT-rhs"] = uval * np.conj(1j * _v(dv[..., 0]))
    out["green-lhs"] = _v(cu.sublap.truncate(0)) * vval
    out["green-rhs"] = -_v(cein("...a,...a->...", du[..., a], dv[..., b]) + cein("...a,...a->...", du[..., b], dv[..., a]))
    out["energy"] = _v(cein("...a,...a->...", du[..., a], du[..., b]))
    return out


def combined_integrand(t: dict, n: int, C: float, ricci: str = "ricci") -> np.ndarray:
    """Pointwise integrand whose integral vanishes for every C: the
    integrated Bochner formula with the reeb term replaced by C times its
    Hessian form plus (1 - C) times its Laplacian form."""
    return ((1 + 2 * C / n) * t["mixed"] + (1 - 2 * C / n) * t["pure"]
            - 4 * (1 - C) / n * t["trace2"] + (-0.5 + (1 - C) / n) * t["lap2"]
            + t["ricci"] - 2 * C / n * t[ricci] - (n - 2 * (1 - C)) * t["Tor"]
            + (0.5 - C / n) * t["Q1"] - (0.25 + C / n) * t["Q2"] + 2 * C / n * t["Q3"])


# ---------------------------------------------------------------------------
# reports

@dataclass
class IdentityReport:
    """Relative residual per identity family, one entry per trial."""

    model: str
    n: int
    families: dict = field(default_factory=dict)
    tolerance: float = TOL_INT
    diagnostics: dict = field(default_factory=dict)

    def worst(self) -> dict:
        return {k: max(v) for k, v in self.families.items()}

    def passed(self) -> bool:
        return all(r <= self.tolerance for v in self.families.values() for r in v)

    def add(self, fam: str, val: float, diagnostic: bool = False):
        (self.diagnostics if diagnostic else self.families).setdefault(fam, []).append(float(val))


def relative(lhs, rhs, ref: float = 0.0) -> float:
    """|lhs - rhs| over the larger side, floored at ``ref`` (the trial's
    Dirichlet energy) so that identities whose sides both vanish report 0."""
    scale = max(abs(lhs), abs(rhs), abs(ref), 1e-300)
    return float(abs(lhs - rhs) / scale)


def enveloped_fields(model: ContactModel, trials: int, rng: np.random.Generator, degree: int = 3,
                     envelope: float = 0.5) -> list:
    """Gaussian-enveloped random polynomials (the integrable test class)."""
    return [calculus.gaussian_enveloped(calculus.random_polynomial(model.chart_dim, degree, rng, FLOAT),
                                        envelope) for _ in range(trials)]


C_EXTRA = (0.0, 0.5)


def _adjoint_green(rep: IdentityReport, I: dict, n: int):
    ref = I["energy"]
    rep.add("adjoint-W", max(relative(I[f"W{al}-lhs"], I[f"W{al}-rhs"], ref) for al in range(n)))
    rep.add("adjoint-iT", relative(I["iT-lhs"], I["iT-rhs"], ref))
    rep.add("green", relative(I["green-lhs"], I["green-rhs"], ref))


def _identities(rep: IdentityReport, I: dict, n: int, Cs):
    ref = I["energy"]
    lhs = I["reeb"]
    qpart = (-0.5 * I["Q1"] - 0.5 * I["Q2"] + I["Q3"]) / n
    hess = (I["mixed"] - I["pure"]) / n
    rep.add("reeb-hessian", relative(lhs, hess - I["ricci"] / n + qpart, ref))
    rep.add("reeb-hessian-without-q", relative(lhs, hess - I["ricci"] / n, ref), diagnostic=True)
    rep.add("reeb-hessian-horizontal-trace", relative(lhs, hess - I["ricci-horizontal"] / n + qpart, ref),
            diagnostic=True)
    rep.add("reeb-hessian-horizontal-trace-without-q", relative(lhs, hess - I["ricci-horizontal"] / n, ref),
            diagnostic=True)
    rep.add("reeb-laplacian", relative(lhs, -2 / n * I["trace2"] + I["lap2"] / (2 * n) + I["Tor"], ref))
    rep.add("tanno-hessian-transfer",
            relative(I["gamma-hessian"], 0.5 * I["qd-trace"] + 0.25 * I["Q2"] - 0.5 * I["Q3"], ref))
    rep.add("gradient-laplacian", relative(I["grad-lap"], -I["lap2"], ref))
    rep.add("dirichlet-energy", relative(-2 * I["energy"], I["u-lap"], ref))
    scale = max(abs(I[k]) for k in ("mixed", "pure", "lap2", "trace2"))
    for C in Cs:
        rep.add(f"combined[C={C:.6g}]", relative(I[f"comb{C}"], 0, scale))
        rep.add(f"combined-horizontal-trace[C={C:.6g}]", relative(I[f"combh{C}"], 0, scale), diagnostic=True)


def check_integral_identities(model: ContactModel, quad: QuadratureSpec, fields_: list,
                              pairs: list | None = None, tol: float = TOL_INT,
                              extra_C=C_EXTRA) -> IdentityReport:
    """Both sides of every global identity for each test field, in one sweep.

    Families: reeb-hessian (reeb term through the Hessian, Ricci and Tanno
    corrections), reeb-laplacian (through the trace and the torsion),
    tanno-hessian-transfer, gradient-laplacian, dirichlet-energy and
    combined[C] for C = 3n/(4n+2) and ``extra_C``; with ``pairs`` (index
    pairs into ``fields_``) also adjoint-W, adjoint-iT and green.
    Diagnostics: the Q-truncated and horizontal-trace variants.
    """
    n = model.n
    if n < 2:
        raise ValueError("the global identities are certified for n >= 2")
    Cs = (3 * n / (4 * n + 2),) + tuple(extra_C)
    pairs = list(pairs or [])

    def integrand(cts, fr, tb):
        out = {}
        for i, ct in enumerate(cts):
            t = identity_terms(ct, tb)
            for C in Cs:
                t[f"comb{C}"] = combined_integrand(t, n, C)
                t[f"combh{C}"] = combined_integrand(t, n, C, "ricci-horizontal")
            out.update({f"u{i}:{k}": v for k, v in t.items()})
        for j, (p, q) in enumerate(pairs):
            out.update({f"p{j}:{k}": v for k, v in pair_terms(cts[p], cts[q], tb).items()})
        return out

    I = sweep(model, quad, fields_, integrand)
    rep = IdentityReport(model.name, n, tolerance=tol)
    for j in range(len(pairs)):
        _adjoint_green(rep, {k.split(":", 1)[1]: v for k, v in I.items() if k.startswith(f"p{j}:")}, n)
    for i in range(len(fields_)):
        _identities(rep, {k.split(":", 1)[1]: v for k, v in I.items() if k.startswith(f"u{i}:")}, n, Cs)
    return rep


def check_adjoint_green(model: ContactModel, quad: QuadratureSpec, pairs: list,
                        tol: float = TOL_INT) -> IdentityReport:
    """Formal adjoints of W_alpha and iT, and the Green identity, per (u, v)."""
    fields_ = [f for pr in pairs for f in pr]
    idx = [(2 * j, 2 * j + 1) for j in range(len(pairs))]
    n = model.n
    rep = IdentityReport(model.name, n, tolerance=tol)

    def integrand(cts, fr, tb):
        out = {}
        for j, (p, q) in enumerate(idx):
            out.update({f"p{j}:{k}": v for k, v in pair_terms(cts[p], cts[q], tb).items()})
        return out

    I = sweep(model, quad, fields_, integrand)
    for j in range(len(pairs)):
        _adjoint_green(rep, {k.split(":", 1)[1]: v for k, v in I.items() if k.startswith(f"p{j}:")}, n)
    return rep

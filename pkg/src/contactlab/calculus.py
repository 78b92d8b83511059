"""Covariant derivatives of scalar fields, the sub-Laplacian, commutation
formulae and the Bochner-type formula, all in an orthonormal frame.

Tables follow the frame index layout of :mod:`contactlab.geometry`:
``d1[j] = u_j``, ``d2[j, k] = u_jk``, ``d3[j, k, l] = u_jkl``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import jets
from .connection import GeometryTables, _cut, worst
from .geometry import Frame, antihol, conj_index, hol
from .jets import EXACT, ComplexJet, Jet, cein

ABLATIONS = ("q-terms", "torsion-terms")


# ---------------------------------------------------------------------------
# scalar fields

@dataclass(frozen=True)
class ScalarField:
    """Real scalar field given by an expression over chart coordinate jets.

    ``coeffs`` is set for plain polynomials and enables a direct Taylor
    shift instead of jet products.
    """

    expr: Callable
    label: str = "u"
    coeffs: tuple | None = None

    def lift(self, p, K: int, mode: str) -> Jet:
        if self.coeffs is not None:
            return poly_jet(self.coeffs, p, K, mode)
        return jets.jet_lift(self.expr, p, K, mode)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(lambda x: self.expr(x) + other.expr(x), f"({self.label}+{other.label})")

    def scaled(self, c) -> "ScalarField":
        return ScalarField(lambda x: self.expr(x) * c, f"{c}*{self.label}")


def poly_jet(items, p, K: int, mode: str) -> Jet:
    """Jet of sum c_a x^a at p: the coefficient of d^b is sum_a c_a C(a, b) p^(a - b)."""
    p = jets.as_array(p, mode)
    m = p.shape[-1]
    mons = jets.monomials(m, K)
    top = max((max(a) for a, _ in items), default=0)
    pw = [[jets.as_array(np.ones(p.shape[:-1], dtype=int), mode)] for _ in range(m)]
    for i in range(m):
        for _ in range(top):
            pw[i].append(pw[i][-1] * p[..., i])
    out = jets.zeros(p.shape[:-1] + (len(mons),), mode)
    for a, c in items:
        c = jets.to_scalar(c, mode)
        for j, b in enumerate(mons):
            if any(bi > ai for ai, bi in zip(a, b)):
                continue
            term = c * math.prod(math.comb(ai, bi) for ai, bi in zip(a, b))
            for i in range(m):
                if a[i] > b[i]:
                    term = term * pw[i][a[i] - b[i]]
            out[..., j] = out[..., j] + term
    return Jet(out, m, K, p)


def polynomial(coeffs: dict, label: str = "p") -> ScalarField:
    """Polynomial sum c_a x^a from a {multi-index: coefficient} mapping."""
    items = tuple((tuple(a), c) for a, c in coeffs.items() if c != 0)

    def expr(x):
        total = x[0] * 0
        for a, c in items:
            term = x[0] * 0 + c
            for i, k in enumerate(a):
                if k:
                    term = term * x[i] ** k
            total = total + term
        return total
    return ScalarField(expr, label, items)


def random_polynomial(m: int, degree: int, rng: np.random.Generator, mode: str = EXACT,
                      label: str = "p") -> ScalarField:
    """Polynomial with small random rational (or float) coefficients."""
    coeffs = {}
    for a in jets.monomials(m, degree):
        num, den = int(rng.integers(-4, 5)), int(rng.integers(1, 4))
        coeffs[a] = Fraction(num, den) if mode == EXACT else num / den
    return polynomial(coeffs, label)


def gaussian_enveloped(poly: ScalarField, c: float = 1.0) -> ScalarField:
    """poly(x) * exp(-c |x|^2)."""
    def expr(x):
        r2 = sum(xi * xi for xi in x)
        if poly.coeffs is not None:
            base = poly_jet(poly.coeffs, x[0].point, x[0].order, x[0].mode)
        else:
            base = poly.expr(x)
        return base * jets.exp(r2 * (-c))
    return ScalarField(expr, f"{poly.label}*gauss({c})")


def ambient_polynomial(coeffs: dict, label: str = "P") -> ScalarField:
    """Restriction to the sphere chart of a polynomial in ambient coordinates
    (x^0..x^n, y^0..y^n) of C^{n+1} (stereographic chart)."""
    poly = polynomial(coeffs, label)

    def expr(x):
        r2 = sum(xi * xi for xi in x)
        inv = 1 / (1 + r2)
        P = [2 * xi * inv for xi in x] + [(r2 - 1) * inv]
        return poly.expr(P)
    return ScalarField(expr, label)


# ---------------------------------------------------------------------------
# covariant tables

@dataclass
class CovariantTable:
    """Frame components of the covariant derivatives of u at a point.

    ``d1`` carries two jet orders, ``d2`` one and ``d3`` the value, which is
    what the commutation and Bochner checks consume.
    """

    frame: Frame
    tables: GeometryTables
    u: Jet
    d1: ComplexJet
    d2: ComplexJet
    d3: ComplexJet
    sublap: ComplexJet

    @property
    def n(self):
        return self.frame.n

    @property
    def value(self):
        return self.u.value

    @property
    def grad_h(self) -> ComplexJet:
        """Components of nabla_H u = u_alphabar W_alpha + u_alpha W_alphabar."""
        n = self.n
        d = self.d1.truncate(0)
        comp = d[..., conj_index(n)]
        return _zero_slot0(comp)

    @property
    def db(self) -> ComplexJet:
        """Coefficients X^alpha = u_alphabar of d_b u = X^alpha W_alpha."""
        return self.d1.truncate(0)[..., antihol(self.n)]

    @property
    def norm_db(self) -> Jet:
        """||d_b u||^2 = sum u_lambda u_lambdabar (a real jet)."""
        n = self.n
        return cein("...l,...l->...", self.d1[..., hol(n)], self.d1[..., antihol(n)]).re


def _zero_slot0(comp: ComplexJet) -> ComplexJet:
    re = np.array(comp.re.coeffs, copy=True)
    im = np.array(comp.im.coeffs, copy=True)
    re[..., 0, :] = jets.to_scalar(0, comp.mode)
    im[..., 0, :] = jets.to_scalar(0, comp.mode)
    return ComplexJet(comp.re._like(re), comp.im._like(im))


def second_derivatives(d1: ComplexJet, frame: Frame, Gamma: ComplexJet) -> ComplexJet:
    """f_jk = W_j(f_k) - Gamma_jk^l f_l from first derivatives f_j."""
    Wd = cein("...kj->...jk", frame.apply(d1))
    G, d1 = _cut(Wd.order, Gamma, d1)
    return Wd - cein("...jkl,...l->...jk", G, d1)


def sublaplacian(d2: ComplexJet, n: int) -> ComplexJet:
    """Delta_b = sum u_{alpha alphabar} + u_{alphabar alpha}."""
    a, b = hol(n), antihol(n)
    return cein("...aa->...", d2[..., a, b]) + cein("...aa->...", d2[..., b, a])


def covariant_table(u: ScalarField | Jet, frame: Frame, tables: GeometryTables,
                    K: int | None = None, third: bool = True) -> CovariantTable:
    """u_j, u_jk, u_jkl and Delta_b u at the frame point.

    ``third=False`` skips u_jkl (d3 is then None); integrands need only the
    first derivative of Delta_b u.
    """
    if K is None:
        K = frame.order + 1 if third else 3
    uj = u if isinstance(u, Jet) else u.lift(frame.point, K, frame.mode)
    if uj.order < 3 or frame.W.order < (3 if third else 2) or tables.Gamma.order < 1:
        raise ValueError("covariant_table needs u of order >= 3, frame order >= 3 and Gamma order >= 1")
    G = tables.Gamma
    d1 = frame.apply(uj).truncate(2)
    d2 = second_derivatives(d1, frame, G).truncate(1)
    if not third:
        return CovariantTable(frame, tables, uj, d1, d2, None, sublaplacian(d2, frame.n))
    Wd2 = cein("...klj->...jkl", frame.apply(d2))
    G0, d20 = _cut(0, G, d2)
    d3 = (Wd2 - cein("...jks,...sl->...jkl", G0, d20)
          - cein("...jls,...ks->...jkl", G0, d20))
    return CovariantTable(frame, tables, uj, d1, d2, d3, sublaplacian(d2, frame.n))


def sublaplacian_of(f: Jet | ComplexJet, frame: Frame, tables: GeometryTables) -> ComplexJet:
    """Delta_b of a scalar jet (order >= 2) via its covariant Hessian."""
    f = f if isinstance(f, ComplexJet) else ComplexJet(f)
    d1 = frame.apply(f).truncate(f.order - 1)
    return sublaplacian(second_derivatives(d1, frame, tables.Gamma), frame.n)


# ---------------------------------------------------------------------------
# commutation formulae

def _const(arr, like: ComplexJet) -> ComplexJet:
    """Constant complex table shaped like ``arr`` on the batch axes of ``like``."""
    batch = np.shape(like.point)[:-1]
    re = jets.zeros(batch + np.shape(arr) + (jets.size(like.m, 0),), like.mode)
    re[..., 0] = jets.as_array(arr, like.mode)
    r = Jet(re, like.m, 0, like.point)
    return ComplexJet(r, r.zero())


def _delta(n: int, mode: str, like: ComplexJet) -> ComplexJet:
    return _const(np.eye(n, dtype=int), like)


TERM_GROUPS = ("q-terms", "torsion-terms", "reeb-terms", "curvature-terms", "connection-torsion")


def commutation_residuals(ct: CovariantTable, ablate=frozenset(), scale: dict | None = None) -> dict:
    """Residual per commutation family.

    ``ablate`` may contain ``'q-terms'`` (drop Tanno-tensor terms from the
    outer formulae) or ``'torsion-terms'`` (drop Webster torsion terms).
    ``scale`` multiplies a whole term group (see TERM_GROUPS) by a factor,
    which is how fault injection perturbs a single term.
    """
    unknown = set(ablate) - set(ABLATIONS)
    if unknown:
        raise ValueError(f"unknown ablation {sorted(unknown)}")
    scale = dict(scale or {})
    unknown = set(scale) - set(TERM_GROUPS)
    if unknown:
        raise ValueError(f"unknown term group {sorted(unknown)}")
    fr, tb = ct.frame, ct.tables
    n, mode = fr.n, fr.mode
    for g in ablate:
        scale[g] = 0
    w = {g: jets.to_scalar(scale.get(g, 1), mode) for g in TERM_GROUPS}
    a, b = hol(n), antihol(n)
    half = jets.to_scalar(Fraction(1, 2), mode)
    quarter = jets.to_scalar(Fraction(1, 4), mode)
    d1, d2, d3 = _cut(0, ct.d1, ct.d2, ct.d3)
    G, c, tau, Q, QD, R = _cut(0, tb.Gamma, fr.c, tb.tau, tb.Q, tb.QD, tb.R)
    dl = _delta(n, mode, d1)
    u0 = d1[..., 0]
    out = {}

    tors = (G - cein("...ijk->...jik", G) - c) * w["connection-torsion"]
    out["commutator-torsion"] = worst(d2 - cein("...ij->...ji", d2) + cein("...ijk,...k->...ij", tors, d1))

    out["second-mixed"] = worst(d2[..., a, b] - cein("...ba->...ab", d2[..., b, a])
                                - cein("...ab,...->...ab", dl, u0).mul_i() * (2 * w["reeb-terms"]))
    out["second-symmetric"] = worst(d2[..., a, a] - cein("...ba->...ab", d2[..., a, a]))
    tor_term = cein("...ab,...b->...a", tau[..., a, b], d1[..., b]) * w["torsion-terms"]
    out["second-reeb"] = worst(d2[..., 0, a] - d2[..., a, 0] + tor_term)

    out["inner-1"] = worst(d3[..., b, a, a] - cein("...agb->...abg", d3[..., b, a, a]))
    out["inner-2"] = worst(d3[..., a, b, a] - cein("...agb->...abg", d3[..., a, a, b])
                           + cein("...gb,...a->...abg", dl, d2[..., a, 0]).mul_i() * (2 * w["reeb-terms"]))

    # outer 1: u_{rhobar gamma alpha} as [r, g, a]
    lhs = d3[..., b, a, a]
    rhs = (cein("...gra->...rga", d3[..., a, b, a])
           - cein("...gr,...a->...rga", dl, d2[..., 0, a]).mul_i() * (2 * w["reeb-terms"])
           + cein("...aBgr,...B->...rga", R[..., a, a, a, b], d1[..., a]) * w["curvature-terms"]
           + cein("...agrB,...B->...rga", QD[..., a, a, b, b], d1[..., b]).mul_i() * (half * w["q-terms"]))
    out["outer-1"] = worst(lhs - rhs)

    # outer 2: u_{rhobar gammabar alpha} as [r, g, a]
    lhs = d3[..., b, b, a]
    swap = cein("...gra->...rga", d3[..., b, b, a])
    Au = cein("...gB,...B->...g", tau[..., b, a], d1[..., a])       # A_gammabar^beta u_beta
    torsion = (cein("...ar,...g->...rga", dl, Au) - cein("...ag,...r->...rga", dl, Au)).mul_i() * 2
    qd_term = -cein("...rBag,...B->...rga", QD[..., b, b, a, a], d1[..., a]).mul_i() * half
    qq_term = -cein("...aBM,...rBg,...M->...rga", Q[..., a, a, b], Q[..., b, b, a], d1[..., b]) * quarter
    rhs = swap + torsion * w["torsion-terms"] + (qd_term + qq_term) * w["q-terms"]
    out["outer-2"] = worst(lhs - rhs)
    # the same line before the curvature component R_alpha^beta_{gammabar rhobar} is substituted
    Rterm = cein("...aBgr,...B->...rga", R[..., a, a, b, b], d1[..., a])
    rhs = swap + Rterm * w["curvature-terms"] + qq_term * w["q-terms"]
    out["outer-2-curvature"] = worst(lhs - rhs)

    lap1 = ct.sublap.truncate(1)
    dlap = fr.apply(lap1).truncate(0)
    out["laplacian-gradient"] = worst(dlap[..., a] - cein("...abb->...a", d3[..., a, a, b])
                                      - cein("...abb->...a", d3[..., a, b, a]))

    ci = conj_index(n)
    out["conjugation"] = worst(d1 - d1[..., ci].conj(), d2 - d2[..., ci, :][..., ci].conj(),
                               d3 - d3[..., ci, :, :][..., ci, :][..., ci].conj())
    return out


def curvature_torsion_formula(tables: GeometryTables) -> object:
    """Residual of R_alpha^beta_{gammabar rhobar} = 2i(A_gammabar^beta delta_{alpha rho}
    - A_rhobar^beta delta_{alpha gamma}) - (i/2) Q_{rhobar betabar, alpha}^gamma."""
    n, mode = tables.n, tables.mode
    a, b = hol(n), antihol(n)
    R, tau, QD = _cut(0, tables.R, tables.tau, tables.QD)
    dl = _delta(n, mode, R)
    lhs = R[..., a, a, b, b]                                       # [a, B, g, r]
    A = tau[..., b, a]                                             # [g, B]
    rhs = (cein("...gB,...ar->...aBgr", A, dl) - cein("...rB,...ag->...aBgr", A, dl)).mul_i() * 2
    rhs = rhs - cein("...rBag->...aBgr", QD[..., b, b, a, a]).mul_i() * jets.to_scalar(Fraction(1, 2), mode)
    return worst(lhs - rhs)


# ---------------------------------------------------------------------------
# Bochner-type formula

@dataclass
class BochnerReport:
    lhs: ComplexJet
    terms: dict
    invariant_terms: dict
    S1: ComplexJet
    S2: ComplexJet
    residuals: dict = field(default_factory=dict)

    def q_terms(self) -> ComplexJet:
        return self.terms["Q1"] + self.terms["Q2"]


Q_TERMS = ("Q1", "Q2")


def bochner_terms(ct: CovariantTable) -> tuple[dict, ComplexJet, ComplexJet]:
    """Frame-form right-hand side terms, plus S1 and S2 of the split."""
    fr, tb = ct.frame, ct.tables
    n, mode = fr.n, fr.mode
    a, b = hol(n), antihol(n)
    half = jets.to_scalar(Fraction(1, 2), mode)
    d1, d2, d3 = _cut(0, ct.d1, ct.d2, ct.d3)
    tau, QD, Q, Ric = _cut(0, tb.tau, tb.QD, tb.Q, tb.Ric)
    ua, ub = d1[..., a], d1[..., b]
    dlap = fr.apply(ct.sublap.truncate(1)).truncate(0)
    t = {}
    S1 = (cein("...al,...al->...", d2[..., a, a], d2[..., b, b])
          + cein("...al,...al->...", d2[..., a, b], d2[..., b, a])) * 2
    t["hessian"] = S1
    t["reeb"] = (cein("...a,...a->...", ua, d2[..., 0, b]) - cein("...a,...a->...", ub, d2[..., 0, a])).mul_i() * 4
    t["torsion"] = (cein("...ab,...a,...b->...", tau[..., b, a], ua, ua)
                    - cein("...ab,...a,...b->...", tau[..., a, b], ub, ub)).mul_i() * (2 * n)
    t["ricci"] = cein("...ab,...a,...b->...", Ric, ub, ua) * 2
    t["gradient"] = cein("...a,...a->...", ua, dlap[..., b]) + cein("...a,...a->...", ub, dlap[..., a])
    trB = cein("...abgg->...ab", QD[..., b, b, a, a])           # Q_{abar bbar, g}^g
    trA = cein("...abgg->...ab", QD[..., a, a, b, b])           # Q_{a b, gbar}^gbar
    t["Q1"] = (cein("...ab,...a,...b->...", trB, ua, ua) - cein("...ab,...a,...b->...", trA, ub, ub)).mul_i()
    t["Q2"] = -cein("...agr,...bgr,...a,...b->...", Q[..., a, a, b], Q[..., b, b, a], ub, ua) * half
    tr = lambda x: cein("...aal->...l", x)
    S2 = (cein("...l,...l->...", ub, tr(d3[..., a, b, a])) + cein("...l,...l->...", ua, tr(d3[..., a, b, b]))
          + cein("...l,...l->...", ua, tr(d3[..., b, a, b])) + cein("...l,...l->...", ub, tr(d3[..., b, a, a])))
    return t, S1, S2


def _real_basis(fr: Frame) -> ComplexJet:
    """Coefficients of a real h-orthonormal basis e_i of HM in the frame:
    e_alpha = (W_alpha + W_alphabar)/sqrt2 and e_{alpha+n} = i(W_alpha - W_alphabar)/sqrt2,
    stored without the 1/sqrt2 (the norm below carries the factor 1/2)."""
    n = fr.n
    M = np.zeros((2 * n, 2 * n + 1), dtype=complex)
    for al in range(n):
        M[al, 1 + al] = 1
        M[al, 1 + n + al] = 1
        M[n + al, 1 + al] = 1j
        M[n + al, 1 + n + al] = -1j
    like = fr.W.truncate(0)
    re = _const(M.real.astype(int), like)
    im = _const(M.imag.astype(int), like)
    return re + im.mul_i()


def invariant_terms(ct: CovariantTable) -> dict:
    """Right-hand side of the invariant statement, each term evaluated from
    its coordinate-free definition through chart vectors, J, h and the coframe.

    ||nabla^2 u||^2 is half the Hilbert-Schmidt norm of the horizontal Hessian
    over a real orthonormal basis (the normalization under which both forms
    of the theorem agree)."""
    fr, tb = ct.frame, ct.tables
    n, mode = fr.n, fr.mode
    a, b = hol(n), antihol(n)
    half = jets.to_scalar(Fraction(1, 2), mode)
    f = fr.fields
    W, cof = _cut(0, fr.W, fr.coframe)
    h, J = _cut(0, ComplexJet(f.metric), ComplexJet(f.J))
    d1, d2 = _cut(0, ct.d1, ct.d2)
    tau, QD, Q, Ric = _cut(0, tb.tau, tb.QD, tb.Q, tb.Ric)
    t = {}

    E = _real_basis(fr)                                           # 2 e_i coefficients / sqrt2
    H2 = cein("...ij,...kl,...jl->...ik", E, E, d2)               # 2 * Hess(e_i, e_k)
    t["hessian"] = cein("...ik,...ik->...", H2, H2) * jets.to_scalar(Fraction(1, 4), mode)

    # chart vectors of nabla_H u, J nabla_H u and d_b u
    gH = cein("...j,...ji->...i", ct.grad_h, W)
    JgH = cein("...ik,...k->...i", J, gH)
    comp = cein("...li,...i->...l", cof, JgH)                     # frame components by the coframe
    t["reeb"] = -cein("...l,...l->...", comp, d2[..., 0, :]) * 4

    db = (gH - cein("...ik,...k->...i", J, gH).mul_i()) * half    # projection to T^(1,0)
    X = cein("...li,...i->...l", cof, db)                          # full frame components
    Xb = X.conj()[..., conj_index(n)]                            # components of Xbar
    # Tor(X, X) = 2 Re(i h(tau_* X, X))
    tX = cein("...j,...jk,...ki->...i", X, tau, W)
    hh = cein("...i,...ij,...j->...", tX, h, cein("...l,...li->...i", X, W))
    t["torsion"] = -(hh.mul_i() + hh.mul_i().conj()) * (2 * n)
    t["ricci"] = cein("...ab,...a,...b->...", Ric, X[..., a], Xb[..., b]) * 2

    # h(nabla_H u, nabla_H Delta_b u) with the second gradient taken in chart coordinates
    lap = ComplexJet(ct.sublap.truncate(1).re)
    dlap = lap.grad().truncate(0)                                  # d_i Delta_b u
    lap_frame = cein("...li,...i->...l", W, dlap)                  # W_l Delta_b u
    gL = cein("...j,...ji->...i", _zero_slot0(lap_frame[..., conj_index(n)]), W)
    t["gradient"] = cein("...i,...ij,...j->...", gH, h, gL)

    trace = cein("...jlkk,...j,...l->...", QD, X, X)              # trace of Y -> (nabla_Y Q)(X, X)
    t["Q1"] = -(trace.mul_i() + trace.mul_i().conj())
    QX = cein("...j,...jal,...li->...ai", X, Q, W)                 # chart vectors Q_X W_a
    QXb = cein("...j,...jal,...li->...ai", Xb, Q, W)
    QXb = QXb[..., conj_index(n), :]                               # Q_Xbar W_abar
    t["Q2"] = -cein("...ai,...ij,...aj->...", QX, h, QXb) * half
    return t


def bochner(u: ScalarField | Jet, frame: Frame, tables: GeometryTables, K: int | None = None,
            ct: CovariantTable | None = None) -> BochnerReport:
    """Both sides of the Bochner-type formula and the residual of each form.

    The left side is Delta_b applied to the jet of ||d_b u||^2."""
    if frame.n < 2:
        raise ValueError("the Bochner-type formula is certified for n >= 2")
    if ct is None:
        ct = covariant_table(u, frame, tables, K)
    lhs = sublaplacian_of(ct.norm_db, frame, tables).truncate(0)
    terms, S1, S2 = bochner_terms(ct)
    inv = invariant_terms(ct)
    rep = BochnerReport(lhs, terms, inv, S1, S2)
    full = sum(terms.values(), lhs * 0)
    trunc = sum((v for k, v in terms.items() if k not in Q_TERMS), lhs * 0)
    rep.residuals = {
        "frame_form": lhs - full,
        "invariant_form": lhs - sum(inv.values(), lhs * 0),
        "cr_truncated": lhs - trunc,
        "lemma_split": lhs - S1 - S2,
    }
    return rep


def bochner_residual(u, frame: Frame, tables: GeometryTables, form: str = "frame_form", K=None):
    """LHS - RHS of the Bochner-type formula in the requested form (a value)."""
    rep = bochner(u, frame, tables, K)
    if form not in rep.residuals:
        raise ValueError(f"unknown form {form!r}")
    return rep.residuals[form].value


def check_commutations(u, frame: Frame, tables: GeometryTables, ablate=frozenset(), K: int | None = None,
                       scale: dict | None = None) -> dict:
    """Residual per commutation family for the scalar field ``u``."""
    return commutation_residuals(covariant_table(u, frame, tables, K), ablate, scale)


BOCHNER_ABLATION_TERMS = {"q-terms": Q_TERMS, "torsion-terms": ("torsion",)}


def bochner_families(rep: BochnerReport, ablate=frozenset()) -> dict:
    """Checked families of one Bochner evaluation.

    frame-form and invariant-form are the two statements of the formula,
    form-agreement their pointwise difference, lemma-split the S1 + S2
    decomposition and cr-truncation-gap the statement that dropping the
    Q-terms costs exactly those terms.  ``ablate`` removes terms from the
    frame form (the check is then expected to fail on models where they live).
    """
    unknown = set(ablate) - set(BOCHNER_ABLATION_TERMS)
    if unknown:
        raise ValueError(f"unknown ablation {sorted(unknown)}")
    drop = {k for a in ablate for k in BOCHNER_ABLATION_TERMS[a]}
    lhs = rep.lhs
    frame_rhs = sum((v for k, v in rep.terms.items() if k not in drop), lhs * 0)
    r = rep.residuals
    return {
        "frame-form": worst(lhs - frame_rhs),
        "invariant-form": worst(r["invariant_form"]),
        "form-agreement": worst(r["frame_form"] - r["invariant_form"]),
        "lemma-split": worst(r["lemma_split"]),
        "cr-truncation-gap": worst(r["cr_truncated"] - rep.q_terms()),
    }

"""Tanaka-Webster-Tanno connection and its curvature data in a frame.

Everything is expressed in the frame of :mod:`contactlab.geometry`
(index 0 = T, 1..n = W_alpha, n+1..2n = W_alphabar).  Table conventions:

* ``Gamma[i, j, k]``      nabla_{W_i} W_j = Gamma_ij^k W_k
* ``Q[j, k, l]``          Q(W_j, W_k) = (nabla_{W_k} J) W_j = Q_jk^l W_l
* ``QD[j, k, s, l]``      covariant derivative Q_{jk,s}^l
* ``tau[b, k]``           tau(T, W_b) = tau_b^k W_k (so A_alpha^betabar = tau[alpha, betabar])
* ``R[a, b, c, d]``       R(W_c, W_d) W_a = R_a^b_cd W_b

Lowering an index with h amounts to conjugating the index, because the
frame Gram matrix is the permutation ``conj_index``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from . import jets
from .geometry import Frame, antihol, conj_index, hol
from .jets import EXACT, ComplexJet, Jet, cein

TOL_POINT = 1e-9


class AxiomError(ValueError):
    """Raised when a computed connection violates its defining axioms."""


@dataclass
class GeometryTables:
    frame: Frame
    Gamma: ComplexJet
    LC: ComplexJet | None = None
    Q: ComplexJet | None = None
    QD: ComplexJet | None = None
    tau: ComplexJet | None = None
    A: ComplexJet | None = None
    R: ComplexJet | None = None
    Ric: ComplexJet | None = None
    scalar: ComplexJet | None = None
    axioms: dict | None = None

    @property
    def n(self):
        return self.frame.n

    @property
    def mode(self):
        return self.frame.mode


# ---------------------------------------------------------------------------
# small table utilities

def _set(cj: ComplexJet, key: tuple, val) -> ComplexJet:
    """Copy of ``cj`` with the table block ``key`` replaced."""
    re = np.array(cj.re.coeffs, copy=True)
    im = np.array(cj.im.coeffs, copy=True)
    full = (Ellipsis,) + key + (slice(None),)
    if isinstance(val, ComplexJet):
        K = cj.order
        val = val.truncate(K)
        re[full] = val.re.coeffs
        im[full] = val.im.coeffs
    else:
        re[full] = jets.to_scalar(val, cj.mode)
        im[full] = jets.to_scalar(0, cj.mode)
    return ComplexJet(cj.re._like(re), cj.im._like(im))


def _take(cj: ComplexJet, axis_from_end: int, idx) -> ComplexJet:
    """Fancy-index one table axis (counted from the end of the table shape)."""
    key = [slice(None)] * axis_from_end
    return cj[(Ellipsis, idx) + tuple(key)]


def lower_last(cj: ComplexJet, n: int) -> ComplexJet:
    """Lower the last (upper) index: X_{..k} = X_{..}^{conj k}."""
    return cj[..., conj_index(n)]


def conj_table(cj: ComplexJet, n: int, rank: int) -> ComplexJet:
    """Entry-wise conjugate with every index conjugated (should equal cj)."""
    ci = conj_index(n)
    out = cj
    for ax in range(rank):
        out = _take(out, rank - 1 - ax, ci)
    return out.conj()


def worst(*items):
    """Max of residuals (numbers or complex jets)."""
    vals = []
    for it in items:
        if isinstance(it, (ComplexJet,)):
            vals.append(it.max_abs())
        elif isinstance(it, Jet):
            vals.append(jets.max_abs(it.coeffs))
        else:
            vals.append(it)
    return max(vals)


def is_zero(res, mode: str, tol: float) -> bool:
    return res == 0 if mode == EXACT else res <= tol


def _half(mode):
    return jets.to_scalar(Fraction(1, 2), mode)


# ---------------------------------------------------------------------------
# connections

def levi_civita(frame: Frame) -> ComplexJet:
    """Levi-Civita coefficients LC[i, j, k] from the Koszul formula.

    With constant frame metric the Koszul formula reduces to
    2 LC_ijk = c_ijk - c_jki + c_kij (all indices lowered).
    """
    if frame.order < 1:
        raise ValueError("frame order too low")
    n = frame.n
    cl = lower_last(frame.c, n)
    low = (cl - cein("...jki->...ijk", cl) + cein("...kij->...ijk", cl)) * _half(frame.mode)
    return lower_last(low, n)


def _two_dtheta(frame: Frame, order: int | None = None) -> ComplexJet:
    """2 dtheta(W_a, W_b) from the coordinate components of theta."""
    W, F = _cut(order, frame.W, ComplexJet(frame.fields.F))
    return cein("...ai,...bj,...ij->...ab", W, W, F)


def _cut(order, *items):
    """Truncate jets to ``order`` (None keeps them) before forming products."""
    if order is None:
        return items if len(items) > 1 else items[0]
    out = tuple(x.truncate(min(order, x.order)) for x in items)
    return out if len(out) > 1 else out[0]


def torsion_reeb(frame: Frame, Gamma: ComplexJet) -> ComplexJet:
    """tau[b, k]: components of tau(T, W_b) = Gamma_0b^k - c_0b^k - Gamma_b0^k."""
    return Gamma[..., 0, :, :] - frame.c[..., 0, :, :] - Gamma[..., :, 0, :]


def axiom_residuals(frame: Frame, Gamma: ComplexJet, order: int | None = 0) -> dict:
    """Residual per defining axiom of the connection, max over index
    combinations and over jet coefficients up to ``order`` (None: all)."""
    n = frame.n
    Gamma = _cut(order, Gamma)
    c, Jf = _cut(order, frame.c, frame.Jf)
    h = slice(1, 2 * n + 1)
    out = {}
    out["nabla-theta"] = worst(Gamma[..., :, :, 0])
    out["nabla-reeb"] = worst(Gamma[..., :, 0, :])
    low = lower_last(Gamma, n)
    out["nabla-metric"] = worst(low + cein("...ijk->...ikj", low))
    tor = Gamma - cein("...ijk->...jik", Gamma) - c
    tor = _set(tor, (slice(None), slice(None), 0), tor[..., :, :, 0] - _two_dtheta(frame, order))
    out["torsion-horizontal"] = worst(tor[..., h, h, :])
    tau = Gamma[..., 0, :, :] - c[..., 0, :, :] - Gamma[..., :, 0, :]
    res = cein("...bs,...sk->...bk", Jf, tau) + cein("...bs,...sk->...bk", tau, Jf)
    out["torsion-reeb-J"] = worst(res[..., h, :])
    # pins the skew part of Gamma_0 alpha^betabar left free by the axioms above
    out["reeb-J-parallel"] = worst(Gamma[..., 0, hol(n), antihol(n)], Gamma[..., 0, antihol(n), hol(n)])
    return out


def twt(frame: Frame, check: bool = True, tol: float = TOL_POINT, check_order: int | None = 0) -> GeometryTables:
    """Tanaka-Webster-Tanno connection coefficients.

    Horizontal block: metric connection with torsion 2 dtheta (x) T, which
    is the Koszul formula restricted to horizontal indices.  Reeb block:
    nabla_T Y = nabla^LC_T Y + J Y for horizontal Y.  The result must pass
    :func:`axiom_residuals`; otherwise :class:`AxiomError` is raised.
    """
    if frame.order < 2:
        raise ValueError("the connection needs a frame of order >= 2")
    n = frame.n
    H = slice(1, 2 * n + 1)
    LC = levi_civita(frame)
    G = ComplexJet(LC.re.zero(), LC.im.zero())
    G = _set(G, (H, H, H), LC[..., H, H, H])
    G = _set(G, (0, H, H), LC[..., 0, H, H] + frame.Jf[..., H, H])
    ax = axiom_residuals(frame, G, check_order)
    if check:
        bad = {k: v for k, v in ax.items() if not is_zero(v, frame.mode, tol)}
        if bad:
            raise AxiomError(f"connection axioms violated: {bad}")
    return GeometryTables(frame=frame, Gamma=G, LC=LC, axioms=ax)


def tanno_q(tables: GeometryTables, shortcut_check: bool = True, tol: float = TOL_POINT) -> GeometryTables:
    """Tanno tensor Q_jk^l = W_k J_j^l + Gamma_ks^l J_j^s - Gamma_kj^s J_s^l
    and its covariant derivative Q_{jk,s}^l."""
    fr, G = tables.frame, tables.Gamma
    kq = G.order - 1                                     # one order is spent on nabla Q
    dJ = _cut(kq, fr.apply(fr.Jf))                       # [j, l, k] = W_k Jf_j^l
    G, Jf = _cut(kq, G, fr.Jf)
    Q = (cein("...jlk->...jkl", dJ) + cein("...ksl,...js->...jkl", G, Jf)
         - cein("...kjs,...sl->...jkl", G, Jf))
    dQ = fr.apply(Q)                                     # [j, k, l, s]
    G, Q = _cut(kq - 1, G, Q)
    QD = (cein("...jkls->...jksl", dQ)
          - cein("...sjr,...rkl->...jksl", G, Q)
          - cein("...skr,...jrl->...jksl", G, Q)
          + cein("...srl,...jkr->...jksl", G, Q))
    out = replace(tables, Q=Q, QD=QD)
    if shortcut_check:
        r = q_route_residual(out)
        if not is_zero(r, fr.mode, tol):
            raise AxiomError(f"Tanno tensor routes disagree by {r}")
    return out


def q_shortcut(tables: GeometryTables) -> ComplexJet:
    """Q_{beta alpha}^{gammabar} = 2i Gamma_{alpha beta}^{gammabar} as a table [beta, alpha, gamma]."""
    n = tables.n
    G = tables.Gamma[..., hol(n), hol(n), antihol(n)]
    return cein("...abg->...bag", G).mul_i() * 2


def q_route_residual(tables: GeometryTables):
    n = tables.n
    Qg = tables.Q[..., hol(n), hol(n), antihol(n)]
    Qc = tables.Q[..., antihol(n), antihol(n), hol(n)]
    s = q_shortcut(tables)
    return worst(Qg - s, Qc - s.conj())


def webster_a(tables: GeometryTables) -> GeometryTables:
    """tau(T, W_b) in the frame; A_alpha^betabar is its T^(0,1) block."""
    tau = torsion_reeb(tables.frame, tables.Gamma)
    n = tables.n
    return replace(tables, tau=tau, A=tau[..., hol(n), antihol(n)])


def webster_shape_residual(tables: GeometryTables):
    n = tables.n
    t = tables.tau
    return worst(t[..., 0, :], t[..., :, 0], t[..., hol(n), hol(n)], t[..., antihol(n), antihol(n)])


def _curvature_definition(fr: Frame, G: ComplexJet, order: int | None = 0) -> ComplexJet:
    """R(W_k, W_l) W_j from nabla nabla - nabla nabla - nabla_[,], table [j, s, k, l]."""
    dG = _cut(order, fr.apply(G))                        # [l, j, s, k] = W_k Gamma_lj^s
    G, c = _cut(order, G, fr.c)
    return (cein("...ljsk->...jskl", dG) - cein("...kjsl->...jskl", dG)
            + cein("...ljr,...krs->...jskl", G, G) - cein("...kjr,...lrs->...jskl", G, G)
            - cein("...klr,...rjs->...jskl", c, G))


def curvature(tables: GeometryTables, order: int = 0) -> GeometryTables:
    """Curvature by the frame formula with the 2 Gamma_0a^b J_cd term,
    Ricci R_{alpha betabar} = R_alpha^gamma_{gamma betabar} and its trace.

    Tables are kept to jet order ``order`` (values by default)."""
    fr = tables.frame
    n = fr.n
    H = slice(1, 2 * n + 1)
    dG = _cut(order, fr.apply(tables.Gamma))             # [d, a, b, c] = W_c Gamma_da^b
    G, Jf = _cut(order, tables.Gamma, fr.Jf)
    Jlow = cein("...dc->...cd", lower_last(Jf, n))       # J_cd = h(W_c, J W_d)
    R8 = (cein("...dabc->...abcd", dG) - cein("...cabd->...abcd", dG)
          - cein("...cde,...eab->...abcd", G, G) + cein("...dce,...eab->...abcd", G, G)
          - cein("...cae,...deb->...abcd", G, G) + cein("...dae,...ceb->...abcd", G, G)
          + cein("...ab,...cd->...abcd", G[..., 0, :, :], Jlow) * 2)
    R = _set(_curvature_definition(fr, tables.Gamma, order), (H, H, H, H), R8[..., H, H, H, H])
    a = hol(n)
    Ric = cein("...aggb->...ab", R[..., a, a, a, antihol(n)])
    scalar = cein("...aa->...", Ric)
    return replace(tables, R=R, Ric=Ric, scalar=scalar)


def geometry_tables(frame: Frame, check: bool = True, tol: float = TOL_POINT) -> GeometryTables:
    """Connection, Tanno tensor, torsion and curvature at the frame's point."""
    t = twt(frame, check=check, tol=tol)
    t = tanno_q(t, shortcut_check=check, tol=tol)
    t = webster_a(t)
    return curvature(t)


# ---------------------------------------------------------------------------
# quadratic forms

def complex_vector(X, like: ComplexJet, mode: str) -> ComplexJet:
    """Constant complex jet from a coefficient vector.

    ``X`` is a complex numpy array in float mode, or a pair (re, im) of
    rational sequences in exact mode.
    """
    if mode == EXACT:
        re, im = X if isinstance(X, tuple) else (X, np.zeros(len(X), dtype=int))
        re, im = jets.as_array(re, EXACT), jets.as_array(im, EXACT)
    else:
        X = np.asarray(X, dtype=complex)
        re, im = X.real, X.imag
    base = like.re
    shape = like.shape[:-3] if len(like.shape) >= 3 else ()

    def mk(v):
        c = jets.zeros(shape + v.shape + (jets.size(base.m, 0),), mode)
        c[..., 0] = v
        return Jet(c, base.m, 0, base.point)
    return ComplexJet(mk(re), mk(im))


def _full(X: ComplexJet) -> tuple[ComplexJet, ComplexJet]:
    return X, X.conj()


def q_forms(tables: GeometryTables, X) -> dict:
    """Q1, Q2, Q3 and Tor evaluated on X = X^alpha W_alpha (values)."""
    n, mode = tables.n, tables.mode
    Xa = complex_vector(X, tables.Gamma, mode) if not isinstance(X, ComplexJet) else X
    Xb = Xa.conj()
    a, b = hol(n), antihol(n)
    QD = tables.QD.truncate(0)
    Qt = tables.Q.truncate(0)
    tA = cein("...abgg->...ab", QD[..., a, a, b, b])         # Q_{ab, gbar}^{gbar}
    tB = cein("...abgg->...ab", QD[..., b, b, a, a])         # Q_{abar bbar, g}^{g}
    q1 = (cein("...ab,...a,...b->...", tB, Xb, Xb) - cein("...ab,...a,...b->...", tA, Xa, Xa)).mul_i()
    Qa = Qt[..., a, a, b]                                    # Q_{alpha gamma}^{rhobar}
    Qb = Qt[..., b, b, a]                                    # Q_{betabar gammabar}^{rho}
    q2 = cein("...agr,...bgr,...a,...b->...", Qa, Qb, Xa, Xb)
    q3 = cein("...arg,...bgr,...a,...b->...", Qa, Qb, Xa, Xb)
    tau = tables.tau.truncate(0)
    A = tau[..., a, b]
    Abar = tau[..., b, a]
    tor = (cein("...ab,...a,...b->...", A, Xa, Xa) - cein("...ab,...a,...b->...", Abar, Xb, Xb)).mul_i()
    return {"Q1": q1, "Q2": q2, "Q3": q3, "Tor": tor}


def values(cj: ComplexJet):
    """Value part: complex ndarray (float) or (re, im) arrays (exact)."""
    return cj.value


# ---------------------------------------------------------------------------
# structural identities

def _n1_table(fr: Frame, order: int | None = 0) -> ComplexJet:
    """N1(W_a, W_c) = [J, J](W_a, W_c) + 2 dtheta(W_a, W_c) T in chart components."""
    f = fr.fields
    J = ComplexJet(f.J)
    W = fr.W
    JW = cein("...ik,...ak->...ai", J, W)
    dW, dJW = _cut(order, W.grad(), JW.grad())
    W, JW, J, T = _cut(order, W, JW, J, ComplexJet(f.reeb))

    def bracket(U, dU, V, dV):
        return cein("...ad,...cid->...aci", U, dV) - cein("...cd,...aid->...aci", V, dU)

    def apply_J(V):
        return cein("...ik,...ack->...aci", J, V)

    JJ = (apply_J(apply_J(bracket(W, dW, W, dW))) + bracket(JW, dJW, JW, dJW)
          - apply_J(bracket(JW, dJW, W, dW)) - apply_J(bracket(W, dW, JW, dJW)))
    return JJ + cein("...ac,...i->...aci", _two_dtheta(fr, order), T)


def _lower_R(R: ComplexJet, n: int) -> ComplexJet:
    """R_{abcd} = h(R(W_c, W_d) W_a, W_b)."""
    return R[..., :, conj_index(n), :, :]


def curvature_symmetries(tables: GeometryTables) -> dict:
    """The three curvature symmetries of R_{alpha betabar gamma mubar}, plus
    the third one with the Bianchi correction -R_{mubar betabar alpha gamma},
    which vanishes when nabla preserves T^(1,0) (integrable J)."""
    n = tables.n
    a, b = hol(n), antihol(n)
    Rl = _lower_R(tables.R.truncate(0), n)
    X = Rl[..., a, b, a, b]
    third = X - cein("...gbam->...abgm", X)
    return {
        "curvature-skew-last": worst(X + cein("...abmg->...abgm", Rl[..., a, b, b, a])),
        "curvature-skew-first": worst(X + cein("...bagm->...abgm", Rl[..., b, a, a, b])),
        "curvature-swap": worst(third),
        "curvature-swap-bianchi": worst(third + cein("...mbag->...abgm", Rl[..., b, b, a, a])),
    }


def structure_residuals(tables: GeometryTables) -> dict:
    """Residual per family of the structural identities at the frame point.

    Each family is a max over all its index combinations; quantities are
    compared by value (derivatives enter only where the identity needs them).
    """
    fr = tables.frame
    n, mode = fr.n, fr.mode
    a, b = hol(n), antihol(n)
    H = slice(1, 2 * n + 1)
    G, Q, QD, R, tau = _cut(0, tables.Gamma, tables.Q, tables.QD, tables.R, tables.tau)
    half = _half(mode)
    out = {f"twt:{k}": v for k, v in axiom_residuals(fr, tables.Gamma, 0).items()}

    out["vanishing"] = worst(
        Q[..., a, a, a], G[..., a, b, a], Q[..., b, a, a], Q[..., b, a, b],
        G[..., a, a, b] + cein("...bag->...abg", Q[..., a, a, b]).mul_i() * half,
        Q[..., 0, :, :], Q[..., :, 0, :], Q[..., :, :, 0])
    out["tanno-routes"] = q_route_residual(tables)

    Gabb = G[..., a, b, b]
    Gaab = G[..., a, a, b]
    Qaab = Q[..., a, a, b]
    QDr = QD[..., a, a, b, b]                 # Q_{alpha beta, rhobar}^{gammabar} as [a, b, r, g]
    out["symmetry"] = worst(
        G[..., a, a, a] + cein("...agb->...abg", Gabb),
        Gaab + cein("...agb->...abg", Gaab),
        Qaab + cein("...gab->...bag", Qaab),
        QDr + cein("...gbra->...abrg", QDr),
        Qaab - cein("...agb->...abg", Qaab) + cein("...gab->...abg", Qaab))

    out["webster-shape"] = webster_shape_residual(tables)
    out.update(curvature_symmetries(tables))
    out["curvature-definition"] = worst(
        _curvature_definition(fr, tables.Gamma, 0)[..., H, H, H, H] - R[..., H, H, H, H])
    Ric = tables.Ric.truncate(0)
    out["ricci-hermitian"] = worst(Ric - cein("...ab->...ba", Ric).conj())

    c0 = fr.c.truncate(0)
    out["conjugation"] = worst(
        G - conj_table(G, n, 3), Q - conj_table(Q, n, 3), QD - conj_table(QD, n, 4),
        R - conj_table(R, n, 4), tau - conj_table(tau, n, 2), c0 - conj_table(c0, n, 3))

    # d theta = -2i theta^alpha ^ theta^alphabar
    dth = _two_dtheta(fr, 0) * half
    E = jets.zeros((2 * n + 1, 2 * n + 1), mode)
    Ei = jets.zeros((2 * n + 1, 2 * n + 1), mode)
    for al in range(1, n + 1):
        Ei[al, al + n] = jets.to_scalar(-1, mode)
        Ei[al + n, al] = jets.to_scalar(1, mode)
    out["structure-dtheta"] = worst(dth - ComplexJet(_const_table(E, dth.re), _const_table(Ei, dth.re)))

    # d theta^l = theta^b ^ omega_b^l + tau^l-part, from the coframe components
    dcf = fr.coframe.grad().truncate(0)                 # [l, b, a] = d_a theta^l_b
    curl = cein("...lba->...lab", dcf) - dcf
    W = fr.W.truncate(0)
    lhs = cein("...ja,...kb,...lab->...jkl", W, W, curl) * half
    d0 = jets.zeros((2 * n + 1,), mode)
    d0[0] = jets.to_scalar(1, mode)
    delta0 = ComplexJet(_const_table(d0, tau.re))
    rhs = (cein("...kjl->...jkl", G) - G
           + cein("...j,...kl->...jkl", delta0, tau) - cein("...k,...jl->...jkl", delta0, tau)) * half
    out["structure-coframe"] = worst((lhs - rhs)[..., :, :, H])

    # 2 h(Q(X, Y), Z) = h(N1(X, Z), J Y) on horizontal frame triples
    N1 = _n1_table(fr, 0)
    hf, J = _cut(0, ComplexJet(fr.fields.metric), ComplexJet(fr.fields.J))
    JW = cein("...ik,...bk->...bi", J, W)
    rhs = cein("...aci,...ij,...bj->...abc", N1, hf, JW)
    out["nijenhuis"] = worst((lower_last(Q, n) * 2 - rhs)[..., H, H, H])
    return out


def _const_table(arr: np.ndarray, like: Jet, rank: int = 2) -> Jet:
    """Constant table ``arr`` carried on the batch axes of ``like`` (a rank-``rank`` table)."""
    shape = like.shape[: len(like.shape) - rank] + arr.shape
    c = jets.zeros(shape + (jets.size(like.m, like.order),), like.mode)
    c[..., 0] = arr
    return Jet(c, like.m, like.order, like.point)


def random_direction(n: int, rng: np.random.Generator, horizontal_only: bool = False) -> np.ndarray:
    """Random complex perturbation dGamma[i, j, k] that keeps nabla theta = 0,
    nabla T = 0 and metric compatibility (skew in the lowered j, k)."""
    d = 2 * n + 1
    ci = conj_index(n)
    low = rng.normal(size=(d, d, d)) + 1j * rng.normal(size=(d, d, d))
    low = low - np.swapaxes(low, 1, 2)
    low[:, 0, :] = 0
    low[:, :, 0] = 0
    if horizontal_only:
        low[0] = 0
    return low[..., ci]

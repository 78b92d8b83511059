"""The curvature constant kappa of the eigenvalue condition, a Galerkin
upper estimate of the first sub-Laplacian eigenvalue on the sphere, and the
report comparing the two through the bound lambda_1 >= n kappa / (n + 1).
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
import sympy
from scipy.stats import qmc

from .connection import geometry_tables, q_forms
from .geometry import ContactModel, build_frame
from .integrals import sphere_density_ratio, sphere_moment
from .jets import FLOAT

TOL_SPEC = 1e-6
TOL_EQ = 0.02


# ---------------------------------------------------------------------------
# kappa

def quasi_random_points(model: ContactModel, count: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the model's sampling region."""
    m = model.chart_dim
    eng = qmc.Halton(d=m, scramble=True, seed=seed)
    if model.name == "sphere":
        out = []
        while len(out) < count:
            p = qmc.scale(eng.random(count), -0.9, 0.9)
            out.extend(p[np.sum(p * p, -1) <= 0.81])
        return np.array(out[:count])
    return qmc.scale(eng.random(count), -1.0, 1.0)


def condition_coefficients(n: int) -> dict:
    """Weights of Ric, Tor, Q1, Q2, Q3 in the eigenvalue condition."""
    if n < 2:
        raise ValueError("the eigenvalue condition needs n >= 2")
    return {"Ric": 1.0, "Tor": -(n + 1.0), "Q1": 0.5,
            "Q2": -(2 * n + 7) / (8 * (n - 1)), "Q3": 3 / (2 * (n - 1))}


def condition_form(tables, X) -> np.ndarray:
    """Left side of the condition at X = X^alpha W_alpha (batched over points)."""
    n = tables.n
    w = condition_coefficients(n)
    qf = q_forms(tables, X)
    Xa = np.asarray(X, dtype=complex)
    Ric = tables.Ric.truncate(0).value
    ric = np.einsum("...ab,a,b->...", Ric, Xa, np.conj(Xa))
    total = w["Ric"] * ric
    for k in ("Tor", "Q1", "Q2", "Q3"):
        total = total + w[k] * qf[k].value
    return total


def condition_matrix(tables, tol: float = 1e-9) -> np.ndarray:
    """Symmetric real 2n x 2n matrix of the condition on X = v_a + i v_{n+a}.

    Tor and Q1 are real parts of complex bilinear forms, so the quadratic
    form lives on the real horizontal space; it is recovered by polarization
    and checked for reality and on a random direction.
    """
    n = tables.n
    E = np.eye(2 * n)

    def cvec(v):
        return v[:n] + 1j * v[n:]

    diag = [condition_form(tables, cvec(E[i])) for i in range(2 * n)]
    batch = np.shape(diag[0])
    M = np.zeros(batch + (2 * n, 2 * n))
    worst_imag = 0.0
    for i in range(2 * n):
        M[..., i, i] = np.real(diag[i])
        worst_imag = max(worst_imag, float(np.max(np.abs(np.imag(diag[i])))))
        for j in range(i + 1, 2 * n):
            s = condition_form(tables, cvec(E[i] + E[j]))
            worst_imag = max(worst_imag, float(np.max(np.abs(np.imag(s)))))
            M[..., i, j] = M[..., j, i] = 0.5 * np.real(s - diag[i] - diag[j])
    v = np.random.default_rng(0).normal(size=2 * n)
    direct = np.real(condition_form(tables, cvec(v)))
    via = np.einsum("...ij,i,j->...", M, v, v)
    if worst_imag > tol or np.max(np.abs(direct - via)) > tol * max(1.0, float(np.max(np.abs(direct)))):
        raise ArithmeticError("condition form is not a real quadratic form (internal inconsistency)")
    return M


@dataclass
class KappaResult:
    kappa: float
    argmin: list
    per_point: list
    spread: float


def kappa(model: ContactModel, points: np.ndarray | None = None, count: int = 200, seed: int = 0) -> KappaResult:
    """Largest kappa with condition(X) >= kappa h(X, Xbar) on the sampled points.

    h(X, Xbar) = sum |X^alpha|^2 = |v|^2, so kappa is the smallest eigenvalue
    of the condition matrix over all samples.  The spread of the per-point
    minima is divided by max(|kappa|, 1) so a flat model reports ~0.
    """
    if model.n < 2:
        raise ValueError("kappa needs n >= 2")
    if points is None:
        points = quasi_random_points(model, count, seed)
    points = np.asarray(points, dtype=float)
    fr = build_frame(model, points, 3, FLOAT)
    tb = geometry_tables(fr, check=False)
    M = condition_matrix(tb)
    mins = np.linalg.eigvalsh(M)[..., 0]
    k = int(np.argmin(mins))
    lo, hi = float(mins.min()), float(mins.max())
    spread = (hi - lo) / max(abs(lo), abs(hi), 1.0)      # relative once |kappa| >= 1
    return KappaResult(lo, points[k].tolist(), mins.tolist(), spread)


# ---------------------------------------------------------------------------
# Galerkin estimate on the sphere

def _ambient_symbols(n: int):
    return sympy.symbols(f"x0:{n + 1}") + sympy.symbols(f"y0:{n + 1}")


def sphere_basis(n: int, degree: int) -> list:
    """Monomials of degree ``degree`` and ``degree - 1`` in C^{n+1}: their
    restrictions span all polynomials of degree <= ``degree`` on the sphere
    and are linearly independent there."""
    N = 2 * n + 2
    out = []
    for d in (degree, degree - 1):
        if d < 0:
            continue
        for combo in itertools.combinations_with_replacement(range(N), d):
            a = [0] * N
            for i in combo:
                a[i] += 1
            out.append(tuple(a))
    return out


def _integrate_poly(poly: sympy.Poly, n: int) -> float:
    return sum(float(c) * sphere_moment(a, n) for a, c in poly.as_dict().items())


def horizontal_energy_density(P: sympy.Poly, Q: sympy.Poly, n: int, syms) -> sympy.Poly:
    """2 Re sum_alpha P_alpha conj(Q_alpha) on the unit sphere for ambient
    polynomials, i.e. the round gradient pairing minus its radial and Reeb
    parts: grad P . grad Q - (x . grad P)(x . grad Q) - (Jx . grad P)(Jx . grad Q)."""
    xs, ys = syms[: n + 1], syms[n + 1:]
    gP = [P.diff(s) for s in syms]
    gQ = [Q.diff(s) for s in syms]
    dot = sum((a * b for a, b in zip(gP, gQ)), sympy.Poly(0, *syms))
    pos = [sympy.Poly(s, *syms) for s in syms]
    rad_P = sum((p * g for p, g in zip(pos, gP)), sympy.Poly(0, *syms))
    rad_Q = sum((p * g for p, g in zip(pos, gQ)), sympy.Poly(0, *syms))
    # Jx = (-y, x) in the ordering (x^0..x^n, y^0..y^n)
    Jx = [-sympy.Poly(y, *syms) for y in ys] + [sympy.Poly(x, *syms) for x in xs]
    reeb_P = sum((p * g for p, g in zip(Jx, gP)), sympy.Poly(0, *syms))
    reeb_Q = sum((p * g for p, g in zip(Jx, gQ)), sympy.Poly(0, *syms))
    return dot - rad_P * rad_Q - reeb_P * reeb_Q


@dataclass
class GalerkinResult:
    lambda1: float
    degree: int
    basis_size: int
    mass_min_eig: float
    stiffness_min_eig: float
    eigenvalues: list = field(default_factory=list)


def galerkin_matrices(model: ContactModel, degree: int, basis_scale: float = 1.0):
    """Mass, stiffness and mean vector of the ambient monomial basis, all
    against dV (exact sphere moments times the constant dV / d sigma)."""
    if model.name != "sphere":
        raise ValueError("the Galerkin estimate is set up for the compact sphere")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    n = model.n
    scale = float(model.params.get("scale", 1))
    syms = _ambient_symbols(n)
    basis = [sympy.Poly(basis_scale * sympy.prod([s ** k for s, k in zip(syms, a)]), *syms)
             for a in sphere_basis(n, degree)]
    if len(set(sphere_basis(n, degree))) != len(basis):
        raise ValueError("duplicate basis monomials")
    ratio = sphere_density_ratio(model)
    N = len(basis)
    Mm = np.zeros((N, N))
    S = np.zeros((N, N))
    for i in range(N):
        for j in range(i, N):
            Mm[i, j] = Mm[j, i] = ratio * _integrate_poly(basis[i] * basis[j], n)
            e = horizontal_energy_density(basis[i], basis[j], n, syms)
            # h restricted to HM is scale times the round metric
            S[i, j] = S[j, i] = ratio * _integrate_poly(e, n) / scale
    mean = np.array([ratio * _integrate_poly(b, n) for b in basis])
    return Mm, S, mean


def lambda1(model: ContactModel, degree: int, basis_scale: float = 1.0) -> GalerkinResult:
    """Smallest generalized eigenvalue of S w = lambda M w on the mean-zero
    part of the basis span (an upper bound for lambda_1, nonincreasing in degree)."""
    Mm, S, mean = galerkin_matrices(model, degree, basis_scale)
    try:
        scipy.linalg.cholesky(Mm, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("mass matrix is not positive definite") from exc
    Z = scipy.linalg.null_space(mean[None, :])          # coefficient vectors with zero mean
    Mz, Sz = Z.T @ Mm @ Z, Z.T @ S @ Z
    L = scipy.linalg.cholesky(Mz, lower=True)
    Linv = scipy.linalg.solve_triangular(L, np.eye(len(L)), lower=True)
    A = Linv @ Sz @ Linv.T
    ev = scipy.linalg.eigh(0.5 * (A + A.T), eigvals_only=True)
    return GalerkinResult(float(ev[0]), degree, len(mean), float(np.linalg.eigvalsh(Mm)[0]),
                          float(ev[0]), ev[:8].tolist())


# ---------------------------------------------------------------------------
# report

@dataclass
class SpectralReport:
    n: int
    model: str
    lambda1_estimate: float | None
    kappa: float
    bound: float | None
    ratio: float | None
    degree: int
    samples: int
    tol_spec: float = TOL_SPEC
    tol_eq: float = TOL_EQ
    status: str = "PASS"
    kappa_spread: float = 0.0
    argmin: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def lichnerowicz_report(model: ContactModel, degree: int = 3, samples: int = 200, seed: int = 0,
                        tol_spec: float = TOL_SPEC, tol_eq: float = TOL_EQ) -> SpectralReport:
    """lambda_1 against n kappa / (n + 1).

    PASS iff ratio >= 1 - tol_spec; NOT-APPLICABLE when kappa <= 0 or the
    model is not compact (the hypothesis of the bound fails)."""
    n = model.n
    kr = kappa(model, count=samples, seed=seed)
    if kr.kappa <= tol_spec or model.name != "sphere":
        return SpectralReport(n, model.name, None, kr.kappa, None, None, degree, samples, tol_spec, tol_eq,
                              "NOT-APPLICABLE", kr.spread, kr.argmin)
    lam = lambda1(model, degree).lambda1
    bound = n * kr.kappa / (n + 1)
    ratio = lam / bound
    status = "PASS" if ratio >= 1 - tol_spec else "FAIL"
    return SpectralReport(n, model.name, lam, kr.kappa, bound, ratio, degree, samples, tol_spec, tol_eq,
                          status, kr.spread, kr.argmin)

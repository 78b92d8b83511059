import numpy as np
import pytest
import scipy.linalg
import sympy

from contactlab import calculus, spectral
from contactlab.connection import geometry_tables
from contactlab.geometry import build_frame, make_sphere, stereographic
from contactlab.jets import FLOAT

from conftest import tables_at


@pytest.fixture(scope="module")
def sphere_kappa(sphere):
    return spectral.kappa(sphere, count=40, seed=3)


def test_condition_needs_n2():
    with pytest.raises(ValueError):
        spectral.condition_coefficients(1)


def test_kappa_heisenberg_is_zero(heis):
    kr = spectral.kappa(heis, count=10)
    assert abs(kr.kappa) <= 1e-12 and kr.spread <= 1e-12


def test_kappa_sphere_constant(sphere_kappa):
    assert sphere_kappa.kappa > 0
    assert sphere_kappa.spread <= 1e-8
    assert len(sphere_kappa.per_point) == 40 and len(sphere_kappa.argmin) == 5


def test_condition_is_ricci_without_torsion_or_tanno(sphere_geo):
    """On an integrable torsion-free model the form reduces to Ric(X, Xbar)."""
    _, tb = sphere_geo
    rng = np.random.default_rng(0)
    Ric = tb.Ric.truncate(0).value
    for _ in range(5):
        X = rng.normal(size=2) + 1j * rng.normal(size=2)
        X /= np.linalg.norm(X)
        want = np.einsum("...ab,a,b->...", Ric, X, np.conj(X))
        assert np.allclose(spectral.condition_form(tb, X), want, atol=1e-10)


def test_condition_matrix_perturbed(pert):
    fr, tb = tables_at(pert, 5, mode=FLOAT)
    M = spectral.condition_matrix(tb)
    assert M.shape == (5, 4, 4)
    assert np.max(np.abs(M - np.swapaxes(M, -1, -2))) == 0
    kr = spectral.kappa(pert, count=10)
    assert np.isfinite(kr.kappa)


def test_condition_eigenvalues_frame_independent(pert):
    P = pert.sample_points(np.random.default_rng(8), 4, FLOAT)
    ev = []
    for seeds in ("chart", "rational"):
        tb = geometry_tables(build_frame(pert, P, 3, FLOAT, seeds=seeds))
        ev.append(np.linalg.eigvalsh(spectral.condition_matrix(tb)))
    assert np.max(np.abs(ev[0] - ev[1])) <= 1e-9


def test_quasi_random_points_in_region(sphere, heis):
    P = spectral.quasi_random_points(sphere, 50, seed=1)
    assert P.shape == (50, 5) and np.all(np.sum(P * P, -1) <= 0.81 + 1e-12)
    Q = spectral.quasi_random_points(heis, 50, seed=1)
    assert np.all(np.abs(Q) <= 1)
    assert np.array_equal(spectral.quasi_random_points(heis, 7, seed=2), spectral.quasi_random_points(heis, 7, seed=2))


# ---------------------------------------------------------------------------
# Galerkin estimate

def test_stiffness_density_matches_frame(sphere):
    """The ambient polynomial used in the stiffness matrix equals
    2 sum |u_alpha|^2 computed through the frame at chart points."""
    syms = spectral._ambient_symbols(2)
    rng = np.random.default_rng(4)
    coeffs = {a: float(rng.integers(-3, 4)) for a in spectral.sphere_basis(2, 2) if rng.random() < 0.5}
    P = sympy.Poly(sum(c * sympy.prod([s ** k for s, k in zip(syms, a)]) for a, c in coeffs.items()), *syms)
    dens = spectral.horizontal_energy_density(P, P, 2, syms)
    pts = sphere.sample_points(np.random.default_rng(5), 6)
    fr = build_frame(sphere, pts, 3, FLOAT)
    ct = calculus.covariant_table(calculus.ambient_polynomial(coeffs), fr, geometry_tables(fr), third=False)
    amb = stereographic(pts)
    want = np.array([float(dens.eval(dict(zip(syms, p)))) for p in amb])
    assert np.allclose(2 * ct.norm_db.value, want, rtol=1e-10, atol=1e-10)


def test_sphere_basis():
    b = spectral.sphere_basis(2, 3)
    assert len(b) == len(set(b)) == 56 + 21
    assert all(sum(a) in (2, 3) for a in b)


@pytest.fixture(scope="module")
def lam(sphere):
    return {d: spectral.lambda1(sphere, d) for d in (1, 2)}


def test_lambda1_degree1_is_first_eigenspace(lam):
    assert lam[1].lambda1 > 0
    assert abs(lam[1].lambda1 - lam[2].lambda1) <= 1e-9
    assert lam[2].lambda1 <= lam[1].lambda1 + 1e-12
    assert lam[1].mass_min_eig > 0


def test_lambda1_basis_scale_invariant(sphere, lam):
    assert abs(spectral.lambda1(sphere, 1, basis_scale=2.0).lambda1 - lam[1].lambda1) <= 1e-12


@pytest.mark.parametrize("degree", [1, 2])
def test_stiffness_kernel_is_constants(sphere, degree):
    Mm, S, mean = spectral.galerkin_matrices(sphere, degree)
    ev = scipy.linalg.eigh(S, Mm, eigvals_only=True)
    assert abs(ev[0]) <= 1e-10 and ev[1] > 1e-3
    assert np.min(np.linalg.eigvalsh(S)) >= -1e-10


def test_galerkin_errors(heis, sphere):
    with pytest.raises(ValueError):
        spectral.lambda1(heis, 1)
    with pytest.raises(ValueError):
        spectral.lambda1(sphere, 0)


# ---------------------------------------------------------------------------
# report

def test_report_sphere_equality(sphere):
    rep = spectral.lichnerowicz_report(sphere, degree=1, samples=20)
    assert rep.status == "PASS"
    assert 1 - 1e-6 <= rep.ratio <= 1.02
    d = rep.to_dict()
    assert d["ratio"] == rep.ratio and d["status"] == "PASS"


def test_report_ratio_scale_invariant(sphere):
    base = spectral.lichnerowicz_report(sphere, degree=1, samples=10)
    scaled = spectral.lichnerowicz_report(make_sphere(2, scale=3), degree=1, samples=10)
    assert abs(scaled.kappa - base.kappa / 3) <= 1e-9 * base.kappa
    assert abs(scaled.lambda1_estimate - base.lambda1_estimate / 3) <= 1e-9 * base.lambda1_estimate
    assert abs(scaled.ratio - base.ratio) <= 1e-9


def test_report_heisenberg_not_applicable(heis):
    rep = spectral.lichnerowicz_report(heis, degree=1, samples=10)
    assert rep.status == "NOT-APPLICABLE" and rep.ratio is None

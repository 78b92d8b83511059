import math
from fractions import Fraction

import numpy as np
import pytest

from contactlab import calculus
from contactlab import integrals as I
from contactlab.geometry import build_frame, make_heisenberg, verify_contact_axioms
from contactlab.jets import EXACT, FLOAT


def scaled_contact_form(model, s):
    """(s theta, T / s, s h_H + s^2 theta x theta, J): the same CR structure
    with the contact form multiplied by s."""
    def theta(x):
        return [s * v for v in model.theta(x)]

    def reeb(x):
        return [v * Fraction(1, s) for v in model.reeb(x)]

    def metric(x):
        h, th = model.metric(x), model.theta(x)
        m = len(th)
        return [[s * (h[i][j] - th[i] * th[j]) + s * s * th[i] * th[j] for j in range(m)] for i in range(m)]
    return model.with_fields(theta=theta, reeb=reeb, metric=metric)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_heisenberg_density_constant(n):
    m = make_heisenberg(n)
    P = m.sample_points(np.random.default_rng(n), 4, EXACT)
    dens = I.volume_density(build_frame(m, P, 1, EXACT))
    assert all(d == 2 ** n * math.factorial(n) for d in dens)


@pytest.mark.parametrize("s, mode", [(2, FLOAT), (4, EXACT)])
def test_density_scales_with_contact_form(heis, s, mode):
    ms = scaled_contact_form(heis, s)
    p = [Fraction(1, 2), -1, Fraction(1, 3), 2, Fraction(-3, 4)]
    assert all(v == 0 for v in verify_contact_axioms(ms, p, EXACT).values())
    if mode == FLOAT:
        p = [float(v) for v in p]
    d1 = I.volume_density(build_frame(heis, p, 1, mode))
    d2 = I.volume_density(build_frame(ms, p, 1, mode))
    if mode == EXACT:
        assert d2 == s ** (heis.n + 1) * d1
    else:
        assert abs(d2 - s ** (heis.n + 1) * d1) <= 1e-12 * d2


def test_sphere_density_positive(sphere):
    fr = build_frame(sphere, sphere.sample_points(np.random.default_rng(0), 12), 1, FLOAT)
    assert np.all(I.volume_density(fr) > 0)


def test_gaussian_closed_form(heis):
    quad = I.QuadratureSpec(order=7, weight=2.0)
    got = I.integrate(lambda x: np.exp(-2 * np.sum(x * x, -1)), heis, quad)
    want = 8 * (math.pi / 2) ** 2.5
    assert abs(got - want) <= 1e-12 * want
    assert I.integrate(lambda x: 0 * x[:, 0], heis, quad) == 0


def test_gaussian_moments_in_budget(heis):
    """x1^4 y2^2 t^6 exp(-|x|^2): product of 1-D moments Gamma((k+1)/2)."""
    quad = I.QuadratureSpec(order=7, weight=1.0)
    f = lambda x: x[:, 0] ** 4 * x[:, 3] ** 2 * x[:, 4] ** 6 * np.exp(-np.sum(x * x, -1))  # noqa: E731
    mom = lambda k: math.gamma((k + 1) / 2)  # noqa: E731
    want = 8 * mom(4) * mom(2) * mom(6) * mom(0) ** 2
    assert abs(I.integrate(f, heis, quad) - want) <= 1e-12 * want


def test_sphere_coordinate_moment(sphere):
    quad = I.QuadratureSpec(profile="sphere_moments")
    vol = I.integrate({(0,) * 6: 1}, sphere, quad)
    for k in range(6):
        a = [0] * 6
        a[k] = 2
        assert abs(I.integrate({tuple(a): 1}, sphere, quad) - vol / 6) <= 1e-12 * vol
    assert I.integrate({(1, 0, 0, 0, 0, 1): 1}, sphere, quad) == 0


def test_sphere_moment_round_measure():
    # area of S^5 is pi^3; area of S^3 is 2 pi^2
    assert abs(I.sphere_moment([0] * 6, 2) - math.pi ** 3) <= 1e-12
    assert abs(I.sphere_moment([0] * 4, 1) - 2 * math.pi ** 2) <= 1e-12


def test_monte_carlo_agrees_with_moments(sphere):
    exact = I.integrate({(2, 0, 0, 0, 0, 0): 1}, sphere, I.QuadratureSpec(profile="sphere_moments"))

    def x0sq(w):
        r2 = np.sum(w * w, -1)
        return (2 * w[:, 0] / (1 + r2)) ** 2
    mc = I.integrate(x0sq, sphere, I.QuadratureSpec(profile="monte_carlo", samples=40000, seed=1))
    assert abs(mc - exact) <= 0.05 * exact


def test_profile_mismatch(heis, sphere):
    with pytest.raises(I.QuadratureError):
        I.integrate({(0,) * 6: 1}, heis, I.QuadratureSpec(profile="sphere_moments"))
    with pytest.raises(I.QuadratureError):
        I.integrate(lambda x: x[:, 0], heis, I.QuadratureSpec(profile="monte_carlo"))
    with pytest.raises(I.QuadratureError):
        I.integrate(lambda x: x[:, 0], sphere, I.QuadratureSpec())
    with pytest.raises(I.QuadratureError):
        I.integrate(lambda x: x[:, 0], sphere, I.QuadratureSpec(profile="sphere_moments"))
    with pytest.raises(I.QuadratureError):
        I.QuadratureSpec(profile="simpson")


def test_relative_floor():
    assert I.relative(0.0, 0.0) == 0
    assert abs(I.relative(1.0, 1.0 + 1e-9) - 1e-9) <= 1e-15
    assert I.relative(1e-20, 0.0, ref=1.0) == 1e-20


# ---------------------------------------------------------------------------
# identities (one small sweep per model, shared by the tests below)

@pytest.fixture(scope="module")
def heis_report(heis):
    fields = I.enveloped_fields(heis, 2, np.random.default_rng(1))
    zero = calculus.gaussian_enveloped(calculus.polynomial({}), 0.5)
    return I.check_integral_identities(heis, I.QuadratureSpec(), fields + [zero], pairs=[(0, 1), (0, 2)])


def test_heisenberg_identities(heis_report):
    fams = heis_report.families
    for k in ("adjoint-W", "adjoint-iT", "green", "reeb-hessian", "reeb-laplacian", "tanno-hessian-transfer",
              "gradient-laplacian", "dirichlet-energy", "combined[C=0.6]"):
        assert max(fams[k]) <= 1e-10, k


def test_zero_field_gives_zero_residuals(heis_report):
    # trial 2 is u = 0 and pair 1 has v = 0
    for k, v in heis_report.families.items():
        if k in ("adjoint-W", "adjoint-iT", "green"):
            assert v[1] == 0, k
        else:
            assert v[2] == 0, k


def test_green_sign(heis):
    """(Delta_b u, u) = -2 sum int |u_alpha|^2 <= 0 for u = v."""
    u = I.enveloped_fields(heis, 1, np.random.default_rng(3))[0]

    def integrand(cts, fr, tb):
        ct = cts[0]
        return {"ulap": np.real(ct.value * ct.sublap.truncate(0).value), "energy": np.real(ct.norm_db.value)}
    out = I.sweep(heis, I.QuadratureSpec(order=5), [u], integrand)
    assert out["ulap"] < 0
    assert abs(out["ulap"] + 2 * out["energy"]) <= 1e-10 * out["energy"]


@pytest.fixture(scope="module")
def pert_report(pert):
    return I.check_integral_identities(pert, I.QuadratureSpec(), I.enveloped_fields(pert, 1, np.random.default_rng(2)))


def test_perturbed_identities_except_reeb_hessian(pert_report):
    fams = pert_report.families
    for k in ("reeb-laplacian", "tanno-hessian-transfer", "gradient-laplacian", "dirichlet-energy",
              "combined[C=0]"):
        assert max(fams[k]) <= 1e-8, k


def test_reeb_hessian_with_horizontal_ricci_trace(pert_report):
    """The Reeb-Hessian identity closes once the Ricci term uses only the
    horizontal trace; the Q-corrections are then needed by a wide margin."""
    d = pert_report.diagnostics
    assert max(d["reeb-hessian-horizontal-trace"]) <= 1e-8
    assert max(d["reeb-hessian-horizontal-trace-without-q"]) > 10 * 1e-8
    assert max(d["combined-horizontal-trace[C=0.6]"]) <= 1e-8


def test_needs_n2():
    m = make_heisenberg(1)
    with pytest.raises(ValueError):
        I.check_integral_identities(m, I.QuadratureSpec(), I.enveloped_fields(m, 1, np.random.default_rng(0)))

import dataclasses
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab import calculus
from contactlab.connection import (AxiomError, axiom_residuals, curvature_symmetries, geometry_tables, levi_civita,
                                   q_forms, random_direction, structure_residuals, twt)
from contactlab.geometry import antihol, build_frame, hol, make_perturbed_heisenberg
from contactlab.jets import EXACT, FLOAT, ComplexJet, Jet, cein

from conftest import tables_at


def bumped(cj: ComplexJet, delta: np.ndarray) -> ComplexJet:
    """cj with a constant complex table added to its value part."""
    re, im = np.array(cj.re.coeffs, copy=True), np.array(cj.im.coeffs, copy=True)
    re[..., 0] += delta.real
    im[..., 0] += delta.imag
    return ComplexJet(Jet(re, cj.re.m, cj.re.order, cj.re.point), Jet(im, cj.im.m, cj.im.order, cj.im.point))


def test_heisenberg_connection_is_flat(heis_geo):
    fr, tb = heis_geo
    assert tb.Gamma.max_abs() == 0
    assert tb.LC.truncate(0).max_abs() > 0                 # Levi-Civita differs from the TWT connection
    assert tb.Q.max_abs() == 0 and tb.tau.max_abs() == 0
    assert tb.R.max_abs() == 0 and tb.Ric.max_abs() == 0 and tb.scalar.max_abs() == 0


@pytest.mark.parametrize("geo", ["heis_geo", "pert_geo", "sphere_geo"])
def test_theta_and_reeb_rows_vanish(geo, request):
    _, tb = request.getfixturevalue(geo)
    assert tb.Gamma[..., :, :, 0].max_abs() == 0
    assert tb.Gamma[..., :, 0, :].max_abs() == 0


@pytest.mark.parametrize("geo", ["heis_geo", "pert_geo"])
def test_levi_civita_torsion_free(geo, request):
    fr, tb = request.getfixturevalue(geo)
    LC = levi_civita(fr)
    tor = LC - cein("...ijk->...jik", LC) - fr.c
    assert tor.truncate(0).max_abs() == 0


def test_perturbed_q_shape(pert_geo):
    fr, tb = pert_geo
    n = fr.n
    a, b = hol(n), antihol(n)
    Q = tb.Q.truncate(0)
    assert Q[..., a, a, b].max_abs() > 0
    assert Q[..., b, b, a].max_abs() > 0
    mask = np.ones((2 * n + 1,) * 3, dtype=bool)
    mask[1:n + 1, 1:n + 1, n + 1:] = False
    mask[n + 1:, n + 1:, 1:n + 1] = False
    vals = np.abs(np.array(Q.re.value, dtype=float)) + np.abs(np.array(Q.im.value, dtype=float))
    assert np.all(vals[..., mask] == 0)
    # Gamma_{alpha beta}^{gammabar} = -(i/2) Q_{beta alpha}^{gammabar} and it is live
    assert tb.Gamma.truncate(0)[..., a, a, b].max_abs() > 0


@pytest.mark.parametrize("geo", ["heis_geo", "sphere_geo"])
def test_integrable_models_have_no_q(geo, request):
    _, tb = request.getfixturevalue(geo)
    assert tb.Q.max_abs() <= 1e-12 and tb.QD.max_abs() <= 1e-12
    assert tb.tau.max_abs() <= 1e-12


def test_sphere_ricci_is_constant_multiple_of_identity(sphere_geo):
    _, tb = sphere_geo
    Ric = tb.Ric.truncate(0).value
    c = Ric[0, 0, 0].real
    assert c > 0
    assert np.max(np.abs(Ric - c * np.eye(2))) <= 1e-8 * c


def test_default_perturbed_has_no_webster_torsion(pert_geo):
    assert pert_geo[1].tau.max_abs() == 0


def test_reeb_dependent_shear_has_webster_torsion():
    m = make_perturbed_heisenberg(2, profile="x1+t")
    _, tb = tables_at(m, 2)
    assert tb.tau.max_abs() > 0
    assert all(v == 0 for k, v in structure_residuals(tb).items() if k != "curvature-swap")


def test_structure_identities_heisenberg(heis_geo):
    assert all(v == 0 for v in structure_residuals(heis_geo[1]).values())


def test_structure_identities_sphere(sphere_geo):
    assert max(structure_residuals(sphere_geo[1]).values()) <= 1e-9


def test_structure_identities_perturbed(pert_geo):
    res = structure_residuals(pert_geo[1])
    assert all(v == 0 for k, v in res.items() if k != "curvature-swap")


def test_curvature_swap_needs_bianchi_term_when_q_is_live(pert_geo):
    """R_{alpha betabar gamma mubar} = R_{gamma betabar alpha mubar} fails once
    J is not integrable; adding the R_{mubar betabar alpha gamma} term restores it."""
    sym = curvature_symmetries(pert_geo[1])
    assert sym["curvature-swap"] > 0
    assert sym["curvature-swap-bianchi"] == 0
    assert sym["curvature-skew-last"] == 0 and sym["curvature-skew-first"] == 0


def test_external_curvature_formula(pert_geo, sphere_geo):
    assert calculus.curvature_torsion_formula(pert_geo[1]) == 0
    assert calculus.curvature_torsion_formula(sphere_geo[1]) <= 1e-9
    m = make_perturbed_heisenberg(2, profile="x1+t")
    assert calculus.curvature_torsion_formula(tables_at(m, 2)[1]) == 0


def test_ricci_hermitian(pert_geo, sphere_geo):
    for _, tb in (pert_geo, sphere_geo):
        Ric = tb.Ric.truncate(0)
        assert (Ric - cein("...ab->...ba", Ric).conj()).max_abs() <= 1e-12


def test_corrupted_gamma_breaks_symmetry(pert_geo):
    fr, tb = pert_geo
    G = tb.Gamma
    re = np.array(G.re.coeffs, copy=True)
    re[..., 1, 1, 3, 0] += 1
    G2 = ComplexJet(Jet(re, G.re.m, G.re.order, G.re.point), G.im)
    res = structure_residuals(dataclasses.replace(tb, Gamma=G2))
    assert res["symmetry"] >= 1


def test_uniqueness_probe(pert):
    """Any admissible direction (keeping nabla theta, nabla T, nabla h) of
    size 1e-3 breaks one of the remaining axioms by more than 1e-4."""
    P = pert.sample_points(np.random.default_rng(5), 3, FLOAT)
    fr = build_frame(pert, P, 3, FLOAT)
    tb = twt(fr)
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = random_direction(fr.n, rng)
        d = 1e-3 * d / np.linalg.norm(d)
        res = axiom_residuals(fr, bumped(tb.Gamma, d))
        assert res["nabla-theta"] <= 1e-15 and res["nabla-reeb"] <= 1e-15 and res["nabla-metric"] <= 1e-15
        assert max(res.values()) > 1e-4


def test_axiom_check_raises(heis):
    fr = build_frame(heis, [0, 0, 0, 0, 0], 1, EXACT)
    with pytest.raises(ValueError):
        twt(fr)
    fr = build_frame(heis, [Fraction(1, 2), 0, 1, 0, 0], 3, EXACT)
    bad = heis.with_fields(almost_complex=lambda x: [[-v for v in row] for row in heis.almost_complex(x)])
    with pytest.raises((AxiomError, ValueError)):
        geometry_tables(build_frame(bad, [Fraction(1, 2), 0, 1, 0, 0], 3, EXACT))


# ---------------------------------------------------------------------------
# quadratic forms

@pytest.fixture(scope="module")
def pert_float(pert):
    return tables_at(pert, 3, mode=FLOAT)


def test_q_forms_zero_vector(pert_float):
    vals = q_forms(pert_float[1], np.zeros(2, dtype=complex))
    assert all(np.max(np.abs(v.value)) == 0 for v in vals.values())


def test_q_forms_integrable(heis_geo):
    vals = q_forms(heis_geo[1], ([1, Fraction(1, 2)], [Fraction(-1, 3), 2]))
    assert all(v.max_abs() == 0 for k, v in vals.items())


def test_q2_is_sum_of_squares_on_e1(pert_float):
    tb = pert_float[1]
    n = tb.n
    Q = tb.Q.truncate(0).value
    direct = np.sum(np.abs(Q[..., 1, 1:n + 1, n + 1:]) ** 2, axis=(-1, -2))
    q2 = q_forms(tb, np.array([1, 0], dtype=complex))["Q2"].value
    assert np.allclose(q2, direct, atol=1e-14)
    assert np.max(direct) > 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_q2_nonnegative_and_forms_real(pert_float, v):
    tb = pert_float[1]
    X = np.array(v[:2]) + 1j * np.array(v[2:])
    vals = q_forms(tb, X)
    assert np.all(vals["Q2"].value.real >= -1e-14)
    for k in ("Q1", "Q2", "Q3", "Tor"):
        assert np.max(np.abs(vals[k].value.imag)) <= 1e-12

from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab import calculus, jets
from contactlab.connection import geometry_tables
from contactlab.geometry import build_frame, make_heisenberg, make_perturbed_heisenberg
from contactlab.jets import EXACT, FLOAT

from conftest import tables_at


def zero(x):
    return x == 0


def heis_lifted_laplacian(expr, syms, n=2):
    """sum_a E_a E_a u over the lifted fields E = d_x + y d_t, d_y - x d_t:
    Delta_b in a frame-free form (the frame is h-unitary with h(E, E) = 1)."""
    xs, ys, t = syms[:n], syms[n:2 * n], syms[-1]
    out = 0
    for a in range(n):
        X = lambda f, a=a: sympy.diff(f, xs[a]) + ys[a] * sympy.diff(f, t)  # noqa: E731
        Y = lambda f, a=a: sympy.diff(f, ys[a]) - xs[a] * sympy.diff(f, t)  # noqa: E731
        out += X(X(expr)) + Y(Y(expr))
    return sympy.expand(out)


def test_constant_field(heis_geo):
    fr, tb = heis_geo
    ct = calculus.covariant_table(calculus.polynomial({(0,) * 5: Fraction(7, 3)}), fr, tb)
    for d in (ct.d1, ct.d2, ct.d3, ct.sublap):
        assert d.max_abs() == 0


def test_reeb_coordinate(heis_geo):
    fr, tb = heis_geo
    ct = calculus.covariant_table(calculus.polynomial({(0, 0, 0, 0, 1): 1}), fr, tb)
    d1 = ct.d1.truncate(0)
    assert d1[..., 1:].max_abs() > 0                       # W_alpha t is a coordinate, not zero
    assert np.all(d1.re.value[..., 0] == 1) and jets.max_abs(d1.im.value[..., 0]) == 0
    assert ct.sublap.max_abs() == 0


def test_sublaplacian_matches_coordinate_oracle(heis_geo):
    fr, tb = heis_geo
    syms = sympy.symbols("x1 x2 y1 y2 t")
    ct = calculus.covariant_table(calculus.polynomial({(2, 0, 0, 0, 0): 1, (0, 0, 2, 0, 0): 1}), fr, tb)
    assert np.all(ct.sublap.truncate(0).re.value == 4) and jets.max_abs(ct.sublap.im.coeffs) == 0
    rng = np.random.default_rng(2)
    u = calculus.random_polynomial(5, 3, rng, EXACT)
    expr = sum(sympy.Rational(c.numerator, c.denominator) * sympy.prod([s ** k for s, k in zip(syms, a)])
               for a, c in u.coeffs)
    lap = heis_lifted_laplacian(expr, syms)
    ct = calculus.covariant_table(u, fr, tb)
    for i, p in enumerate(fr.point):
        want = lap.subs(dict(zip(syms, [sympy.Rational(int(v.numerator), int(v.denominator)) for v in p])))
        got = ct.sublap.truncate(0).re.value[i]
        assert sympy.Rational(int(got.numerator), int(got.denominator)) == want


def test_needs_jet_order(heis_geo):
    fr, tb = heis_geo
    u = calculus.polynomial({(1, 0, 0, 0, 0): 1})
    with pytest.raises(ValueError):
        calculus.covariant_table(u, fr, tb, K=2)


# ---------------------------------------------------------------------------
# commutation formulae

def test_commutation_heisenberg_monomial(heis_geo):
    fr, tb = heis_geo
    u = calculus.polynomial({(1, 0, 0, 1, 1): 1})          # x1 y2 t
    assert all(zero(v) for v in calculus.check_commutations(u, fr, tb).values())


def test_commutation_perturbed_and_ablation(pert):
    fr, tb = tables_at(pert, 10, seed=4)
    rng = np.random.default_rng(11)
    u = calculus.random_polynomial(5, 3, rng, EXACT)
    ct = calculus.covariant_table(u, fr, tb)
    assert all(zero(v) for v in calculus.commutation_residuals(ct).values())
    dropped = calculus.commutation_residuals(ct, {"q-terms"})
    assert dropped["outer-1"] > 0 and dropped["outer-2"] > 0
    with pytest.raises(ValueError):
        calculus.commutation_residuals(ct, {"nonsense"})


def test_commutation_sphere(sphere_geo):
    fr, tb = sphere_geo
    x1 = calculus.ambient_polynomial({(1, 0, 0, 0, 0, 0): 1})
    assert max(calculus.check_commutations(x1, fr, tb).values()) <= 1e-8


def test_torsion_terms_are_live_with_reeb_dependent_shear():
    m = make_perturbed_heisenberg(2, profile="x1+t")
    fr, tb = tables_at(m, 3)
    u = calculus.random_polynomial(5, 3, np.random.default_rng(0), EXACT)
    ct = calculus.covariant_table(u, fr, tb)
    assert all(zero(v) for v in calculus.commutation_residuals(ct).values())
    dropped = calculus.commutation_residuals(ct, {"torsion-terms"})
    assert dropped["second-reeb"] > 0 and dropped["outer-2"] > 0


# ---------------------------------------------------------------------------
# Bochner-type formula

def test_bochner_constant(pert_geo):
    fr, tb = pert_geo
    rep = calculus.bochner(calculus.polynomial({(0,) * 5: 3}), fr, tb)
    assert all(r.max_abs() == 0 for r in rep.residuals.values())


@pytest.mark.parametrize("geo", ["heis_geo", "pert_geo"])
def test_bochner_exact(geo, request):
    fr, tb = request.getfixturevalue(geo)
    u = calculus.random_polynomial(5, 3, np.random.default_rng(8), EXACT)
    rep = calculus.bochner(u, fr, tb)
    fam = calculus.bochner_families(rep)
    assert all(zero(v) for v in fam.values())


def test_bochner_sphere(sphere_geo):
    fr, tb = sphere_geo
    rng = np.random.default_rng(3)
    u = calculus.ambient_polynomial({a: float(rng.integers(-3, 4)) for a in jets.monomials(6, 3)})
    fam = calculus.bochner_families(calculus.bochner(u, fr, tb))
    assert max(fam.values()) <= 1e-8


def test_cr_truncation_costs_exactly_the_q_terms(pert_geo):
    fr, tb = pert_geo
    u = calculus.random_polynomial(5, 3, np.random.default_rng(9), EXACT)
    rep = calculus.bochner(u, fr, tb)
    assert rep.residuals["cr_truncated"].max_abs() > 0
    assert (rep.residuals["cr_truncated"] - rep.q_terms()).max_abs() == 0
    assert calculus.bochner_families(rep, {"q-terms"})["frame-form"] > 0


def test_bochner_residual_forms(pert_geo):
    fr, tb = pert_geo
    u = calculus.random_polynomial(5, 3, np.random.default_rng(1), EXACT)
    for form in ("frame_form", "invariant_form"):
        v = calculus.bochner_residual(u, fr, tb, form)
        assert all(zero(x) for x in np.ravel(v[0])) and all(zero(x) for x in np.ravel(v[1]))
    assert any(x != 0 for x in np.ravel(calculus.bochner_residual(u, fr, tb, "cr_truncated")[0]))
    with pytest.raises(ValueError):
        calculus.bochner_residual(u, fr, tb, "nope")


def test_bochner_needs_n2():
    m = make_heisenberg(1)
    fr, tb = tables_at(m, 1)
    with pytest.raises(ValueError):
        calculus.bochner(calculus.polynomial({(1, 0, 0): 1}), fr, tb)


# ---------------------------------------------------------------------------
# properties

coef = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@st.composite
def cubic(draw, m=5):
    return calculus.polynomial({a: draw(coef) for a in jets.monomials(m, 3)})


@settings(max_examples=25, deadline=None)
@given(cubic())
def test_hessian_trace_inequality(pert_geo, u):
    """sum |u_{alpha betabar}|^2 >= (1/n) |sum_alpha u_{alpha alphabar}|^2."""
    fr, tb = pert_geo
    n = fr.n
    ct = calculus.covariant_table(u, fr, tb, third=False)
    d2 = ct.d2.truncate(0)
    M = d2[..., 1:n + 1, n + 1:]
    lhs = jets.cein("...ab,...ab->...", M, M.conj()).re.value
    tr = jets.cein("...aa->...", M)
    rhs = tr.abs2().value
    assert all(lhs[i] * n >= rhs[i] for i in range(len(lhs)))
    assert all(v >= 0 for v in ct.norm_db.value)


@settings(max_examples=25, deadline=None)
@given(cubic(), cubic(), coef, coef)
def test_sublaplacian_linear(pert_geo, u, v, a, b):
    fr, tb = pert_geo
    combo = {}
    for k, c in u.coeffs:
        combo[k] = combo.get(k, 0) + a * c
    for k, c in v.coeffs:
        combo[k] = combo.get(k, 0) + b * c
    w = calculus.polynomial(combo)
    lu = calculus.covariant_table(u, fr, tb, third=False).sublap
    lv = calculus.covariant_table(v, fr, tb, third=False).sublap
    lw = calculus.covariant_table(w, fr, tb, third=False).sublap
    assert (lw - lu * a - lv * b).max_abs() == 0


@settings(max_examples=10, deadline=None)
@given(cubic())
def test_conjugation_mirror(heis_geo, u):
    ct = calculus.covariant_table(u, *heis_geo)
    assert calculus.commutation_residuals(ct)["conjugation"] == 0


def test_frame_independence(pert):
    """Chart seeds and rational seeds give different frames, same invariants."""
    P = pert.sample_points(np.random.default_rng(6), 4, FLOAT)
    u = calculus.random_polynomial(5, 3, np.random.default_rng(7), FLOAT)
    out = []
    for seeds in ("chart", "rational"):
        fr = build_frame(pert, P, 3, FLOAT, seeds=seeds)
        tb = geometry_tables(fr)
        rep = calculus.bochner(u, fr, tb)
        ct = calculus.covariant_table(u, fr, tb)
        out.append((fr.W.truncate(0).re.value, ct.sublap.truncate(0).value, ct.norm_db.value,
                    rep.residuals["frame_form"].value))
    assert np.max(np.abs(out[0][0] - out[1][0])) > 1e-3            # the frames really differ
    for a, b in zip(out[0][1:], out[1][1:]):
        assert np.max(np.abs(a - b)) <= 1e-9

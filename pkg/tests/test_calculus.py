import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncsr import coeff as C
from ncsr.algebra import NormalForm, TagError, normalize, quotient
from ncsr.calculus import (
    C_function,
    GradedFunction as G,
    NotADerivation,
    _cenv,
    chebyshev_grid,
    d_nc,
    derivation_to_inner,
    exactness_defects,
    hodge_df,
    interior_columns,
    jacobi_residual,
    laplacian,
    leibniz_defect,
    leibniz_scan,
    metric_pair,
    pb_limit_check,
    poisson,
    random_AR,
    sample_points,
    scalar_offset,
    vector_apply,
    window_lattice,
    xi_relations,
)
from ncsr.profile import polynomial_profile
from ncsr.representation import standard_rep, trivial_lattice

Z2 = polynomial_profile([0.0, 0.0, 1.0])
Z4 = polynomial_profile([0.0, 0.0, 0.0, 0.0, 1.0])
ZS = chebyshev_grid(-1.0, 1.0, 15)
XP, XM, X0 = NormalForm.gen("AR", "X+"), NormalForm.gen("AR", "X-"), NormalForm.scalar("AR", C.X0)


def test_pb_generators():
    assert poisson(G.z(), G.x_plus()).comps == G.x_plus().comps
    np.testing.assert_allclose(poisson(G.x_plus(), G.x_minus())(ZS, 0.4, 1.0, Z4), Z4(ZS, deriv=1), atol=1e-12)
    f = G.from_AR(random_AR(np.random.default_rng(1)))
    assert np.abs(poisson(f, f)(ZS, 0.3, 1.0, Z2)).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jacobi(seed):
    rng = np.random.default_rng(seed)
    f, g, h = (G.from_AR(random_AR(rng)) for _ in range(3))
    z = chebyshev_grid(-0.9, 0.9, 9)
    assert jacobi_residual(f, g, h, z, 1.0, Z4) <= 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pb_antisymmetric_and_bilinear(seed):
    rng = np.random.default_rng(seed)
    f, g, h = (G.from_AR(random_AR(rng)) for _ in range(3))
    ev = lambda F: F(ZS, 0.7, 1.0, Z4)
    np.testing.assert_allclose(ev(poisson(f, g)), -ev(poisson(g, f)), atol=1e-10)
    np.testing.assert_allclose(ev(poisson(f + h.scale(2.0), g)), ev(poisson(f, g)) + 2 * ev(poisson(h, g)), atol=1e-9)


def test_sphere_C_and_metric():
    c = np.real(C.evaluate(C_function(), _cenv(ZS, 1.0, Z2)))
    np.testing.assert_allclose(c, 4.0, atol=1e-12)
    g = metric_pair(G.z(), G.z())(ZS, 0.0, 1.0, Z2)
    np.testing.assert_allclose(g, 1 - ZS**2, atol=1e-10)
    assert np.abs(metric_pair(G.const(3.0), G.const(3.0))(ZS, 0.0, 1.0, Z2)).max() == 0


def test_metric_symmetric(rng):
    f, h = G.from_AR(random_AR(rng)), G.from_AR(random_AR(rng))
    np.testing.assert_allclose(metric_pair(f, h)(ZS, 0.2, 1.0, Z4), metric_pair(h, f)(ZS, 0.2, 1.0, Z4), atol=1e-10)


def test_sphere_laplacian():
    z = ZS[np.abs(ZS) < 0.95]
    np.testing.assert_allclose(laplacian(G.z())(z, 0.0, 1.0, Z2), -2 * z, atol=1e-9)
    xp = G.x_plus()
    np.testing.assert_allclose(laplacian(xp)(z, 0.7, 1.0, Z2), -2 * xp(z, 0.7, 1.0, Z2), atol=1e-9)
    assert np.abs(laplacian(G.const(1.0))(z, 0.0, 1.0, Z2)).max() == 0


def test_hodge_of_z():
    # *dz = i X_+ dX_- - i X_- dX_+ on the unit sphere
    h = hodge_df(G.z())
    z = ZS
    np.testing.assert_allclose(h["dX-"](z, 0.3, 1.0, Z2), 1j * G.x_plus()(z, 0.3, 1.0, Z2), atol=1e-12)
    np.testing.assert_allclose(h["dX+"](z, 0.3, 1.0, Z2), -1j * G.x_minus()(z, 0.3, 1.0, Z2), atol=1e-12)
    assert np.abs(h["dX0"](z, 0.3, 1.0, Z2)).max() == 0
    assert all(np.abs(v(z, 0.3, 1.0, Z2)).max() == 0 for v in hodge_df(G.const(2.0)).values())


def test_sample_points_excludes_zeros_of_C():
    kept, excluded = sample_points(-1.0, 1.0, 1.0, Z2)
    assert len(excluded) == 0 and len(kept) == 16


def test_pb_limit_exact_for_x0():
    for h in (XP, XM):
        s = pb_limit_check(X0, h, Z4, (-1.0, 1.0), [0.1, 0.05, 0.025], margin=0.0)
        assert max(s["defect"]) <= 1e-12
    s = pb_limit_check(XP, XP, Z4, (-1.0, 1.0), [0.1, 0.05])
    assert max(s["defect"]) == 0


def test_pb_limit_xp_xm():
    s = pb_limit_check(XP, XM, Z4, (-1.0, 1.0), [0.1, 0.05, 0.025])
    assert abs(s["slope"] - 1.0) <= 0.2


def test_exactness_on_lattices():
    for prof, eps in ((Z2, 0.5), (Z2, 0.25), (polynomial_profile([0.0, 0.0, 1.0, 0.0, 1.0]), 0.3)):
        d = exactness_defects(trivial_lattice(prof, eps, 8))
        assert max(d["d(1)"], d["d(X0)-xi0"], d["d(X+)-xi+"]) <= 1e-12


def test_printed_bracket_breaks_d1():
    L = trivial_lattice(Z2, 0.5, 8)
    assert exactness_defects(L, "printed")["d(1)"] > 1e-3
    assert exactness_defects(L, "left")["d(X+)-xi+"] > 1e-3


def test_d_one_is_zero_symbolically():
    w = d_nc(NormalForm.scalar("AR", 1))
    assert not w.g_plus.terms and not w.g_zero.terms


def test_xi_relations_and_d_xminus():
    out = []
    for eps in (0.1, 0.05, 0.025):
        L, n = window_lattice(Z2, eps, 2.0)
        r = xi_relations(L, interior_columns(L, n))
        assert r["xi_minus"] <= 1e-12 and r["xi_plus"] <= 1e-12
        out.append(r["d(X-)-xi_minus"])
    # d(X-) - xi_- is O(eps), not zero
    assert out[0] > out[1] > out[2] > 0
    assert 1.5 < out[1] / out[2] < 2.5


def test_leibniz_with_unit():
    assert leibniz_defect(NormalForm.scalar("AR", 1), XP, Z2, 0.05) == 0
    assert leibniz_defect(XP, NormalForm.scalar("AR", 1), Z2, 0.05) <= 1e-12


def test_leibniz_x0_x0_is_order_eps():
    d = [leibniz_defect(X0, X0, Z2, e) for e in (0.05, 0.025)]
    assert 1.6 < d[0] / d[1] < 2.4


def test_leibniz_xp_xp_scan():
    s = leibniz_scan(XP, XP, Z2, [0.05, 0.025, 0.0125])
    assert 0.7 <= s["slope"] <= 1.3
    assert all(1.4 <= r <= 2.6 for r in s["ratios"])


def test_vector_apply():
    xi = quotient(normalize(["a+", "a+"], "B"), "q4")
    v = vector_apply(xi, X0)
    assert v.tag == "AR" and v.terms
    assert vector_apply(NormalForm("PSI"), X0).terms == {}
    with pytest.raises(TagError):
        vector_apply(quotient(normalize(["a+"], "B"), "q4"), X0)


def _ad(h):
    return lambda A: h @ A - A @ h


def test_inner_example_dim6():
    rep = standard_rep((-1.5, 1.5), 0.5, "AR", R=-1.5, rho=Z2)
    assert rep.dim == 6
    h = rep.Xp + rep.X0 @ rep.X0
    ad = _ad(h)
    f = derivation_to_inner(rep, ad(rep.X0), ad(rep.Xp), ad(rep.Xm))
    assert scalar_offset(f - h) <= 1e-8


def test_inner_zero_and_fault():
    rep = standard_rep((-1.5, 1.5), 0.5, "AR", R=-1.5, rho=Z2)
    Z = np.zeros((6, 6))
    assert scalar_offset(derivation_to_inner(rep, Z, Z, Z)) == 0
    with pytest.raises(NotADerivation, match="input is not a derivation"):
        derivation_to_inner(rep, np.diag(np.arange(6.0)), Z, Z)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_inner_round_trip(seed):
    rng = np.random.default_rng(seed)
    rep = standard_rep((-1.25, 1.25), 0.5, "AR", R=-1.25, rho=Z2)
    h = rng.normal(size=(rep.dim,) * 2) + 1j * rng.normal(size=(rep.dim,) * 2)
    ad = _ad(h)
    f = derivation_to_inner(rep, ad(rep.X0), ad(rep.Xp), ad(rep.Xm))
    adf = _ad(f)
    for X in (rep.X0, rep.Xp, rep.Xm):
        assert np.abs(adf(X) - ad(X)).max() <= 1e-8
    assert scalar_offset(f - h) <= 1e-8

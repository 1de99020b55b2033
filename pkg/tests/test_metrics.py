import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horomass import metrics as M
from horomass.charts import ChartId, Point, to_chart
from horomass.errors import DomainError, ValidationError
from horomass.geomkernel import scalar_curvature

from oracles import ads_rm

H, Y, X, C = ChartId.HYPERBOLOIDAL, ChartId.HALFSPACE, ChartId.HOROSPHERICAL, ChartId.CARTESIAN


def sample_z(n=3, count=20, r_lo=1.5, r_hi=50.0, seed=0):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * np.geomspace(r_lo, r_hi, count)[:, None]


@pytest.mark.parametrize("n,m", [(3, 1.0), (3, 0.5), (3, 2.0), (4, 1.0), (5, 0.3)])
def test_horizon_radius_matches_oracle(n, m):
    assert M.ads_horizon_radius(n, m) == pytest.approx(float(ads_rm(n, m)), rel=1e-10)


def test_horizon_radius_n3_m1_is_one():
    assert M.ads_horizon_radius(3, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_ads_margin_and_domain():
    model = M.ads_schwarzschild(3, 1.0)
    assert model.r_min == pytest.approx(1.01)
    with pytest.raises(DomainError):
        model.jet(H, np.array([[0.5, 0.0, 0.0]]))


@pytest.mark.parametrize("chart", [H, Y, X])
def test_ads_metric_symmetric_positive(chart):
    model = M.ads_schwarzschild(3, 1.0)
    x = to_chart(Point(H, sample_z()), chart).coords
    g = model.metric(chart, x)
    assert np.array_equal(g, np.swapaxes(g, -1, -2))
    assert np.all(np.linalg.eigvalsh(g) > 0)


def test_ads_only_radial_component():
    model = M.ads_schwarzschild(3, 1.0)
    z = sample_z()
    h = model.jet(H, z).h
    # any vector orthogonal to z is in the kernel of h: only h_rr survives
    perp = np.cross(z, np.array([0.3, -0.2, 0.9]))
    assert np.max(np.abs(np.einsum("nij,nj->ni", h, perp))) < 1e-15 * np.max(np.abs(h))


def test_ads_radial_component_closed_form():
    # g_rr - b_rr = 1/(1+r^2-2m/r) - 1/(1+r^2)
    model = M.ads_schwarzschild(3, 1.0)
    z = sample_z()
    r = np.linalg.norm(z, axis=1)
    u = z / r[:, None]
    h_rr = np.einsum("ni,nij,nj->n", u, model.jet(H, z).h, u)
    # the reference itself cancels at large r
    np.testing.assert_allclose(h_rr, 1 / (1 + r**2 - 2 / r) - 1 / (1 + r**2), rtol=1e-9)


@pytest.mark.parametrize("chart", [H, Y, X])
def test_ads_scalar_curvature(chart):
    model = M.ads_schwarzschild(3, 1.0)
    x = to_chart(Point(H, sample_z(count=6, r_hi=20)), chart).coords
    R = scalar_curvature(model, Point(chart, x))
    np.testing.assert_allclose(R, -6.0, atol=1e-6)


def test_analytic_derivatives_match_fd():
    for model in (M.ads_schwarzschild(3, 1.0), M.angular_bump(3, q=2.5)):
        x = to_chart(Point(H, sample_z(count=8, r_lo=2, r_hi=10)), X).coords
        a, f = model.jet(X, x), model.with_fd().jet(X, x)
        scale = np.max(np.abs(a.dh))
        assert np.max(np.abs(a.dh - f.dh)) < 1e-6 * scale


def test_schwarzschild_af_conformal_factor():
    model = M.schwarzschild_af(1.0)
    g = model.metric(C, np.array([[2.0, 0.0, 0.0]]))[0]
    np.testing.assert_allclose(g, 2.44140625 * np.eye(3), rtol=1e-15)
    with pytest.raises(DomainError):
        model.jet(C, np.array([[0.4, 0.0, 0.0]]))


def test_small_mass_tends_to_flat():
    g = M.schwarzschild_af(1e-12).metric(C, np.array([[5.0, 1.0, 0.0]]))[0]
    np.testing.assert_allclose(g, np.eye(3), atol=1e-11)


def test_zero_spec_is_background():
    model = M.custom_perturbation(M.PerturbationSpec("zero", 3))
    assert model.is_exact_background
    x = sample_z()
    np.testing.assert_array_equal(model.metric(H, x), M.hyperbolic_background(3).metric(H, x))


def test_scaled_ads_unit_scale_matches_ads():
    a = M.ads_schwarzschild(3, 1.0)
    s = M.custom_perturbation(M.PerturbationSpec("scaled_ads", 3, None, {"m": 1.0, "scale": 1.0}))
    x = sample_z()
    np.testing.assert_allclose(s.metric(H, x), a.metric(H, x), rtol=1e-15)


def test_bump_norm_profile():
    model = M.angular_bump(3, amplitude=0.1, q=3.0)
    r = 7.0
    z = np.array([[r, 0.0, 0.0]])  # on the axis the angular profile is 1
    hn, _ = M.tensor_norms_b(model.jet(H, z))
    assert hn[0] == pytest.approx(0.1 * (1 + r * r) ** -1.5, rel=1e-12)
    assert M.tensor_norms_b(model.jet(H, -z))[0][0] == 0.0


def test_not_positive_definite_is_rejected():
    with pytest.raises(ValidationError):
        M.angular_bump(3, amplitude=-5.0)


def test_falloff_must_exceed_half_dimension():
    with pytest.raises(ValidationError):
        M.angular_bump(3, q=1.4)


def test_expression_perturbation():
    spec = M.PerturbationSpec("expression", 3, 4.0, {"components": {"h11": "0.1*r**-4", "h23": "0.0"}})
    model = M.custom_perturbation(spec)
    z = np.array([[2.0, 1.0, 0.5]])
    h = model.jet(H, z).h[0]
    assert h[0, 0] == pytest.approx(0.1 * np.linalg.norm(z) ** -4)
    with pytest.raises(ValidationError):
        M.custom_perturbation(M.PerturbationSpec("expression", 3, None, {"components": {"h11": "r"}}))


def test_decay_check_exact_background():
    rep = M.decay_check(M.hyperbolic_background(3))
    assert rep.exact and not rep.flagged


@pytest.mark.parametrize("model,q", [(M.ads_schwarzschild(3, 1.0), 3.0), (M.angular_bump(3, q=2.5), 2.5)])
def test_decay_check_exponent(model, q):
    rep = M.decay_check(model)
    assert rep.exponent == pytest.approx(q, abs=0.05)
    assert not rep.flagged


def test_decay_check_flags_slow_decay():
    spec = M.PerturbationSpec("expression", 3, 3.0, {"components": {"h11": "0.01*r**-2"}})
    rep = M.decay_check(M.custom_perturbation(spec))
    assert rep.flagged


@given(st.floats(-2, 2), st.floats(0.01, 1.0))
def test_scaling_is_linear_in_h(lam, amp):
    base = M.angular_bump(3, amplitude=amp)
    z = sample_z(count=5)
    np.testing.assert_allclose(base.scaled(lam).jet(H, z).h, lam * base.jet(H, z).h, rtol=1e-14, atol=1e-300)


def test_rotation_pushes_forward():
    base = M.angular_bump(3)
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    rot = base.rotated(R)
    z = sample_z(count=5)
    expect = np.einsum("ia,nab,jb->nij", R, base.jet(H, z @ R).h, R)  # R h(R^T z) R^T
    np.testing.assert_allclose(rot.jet(H, z).h, expect, rtol=1e-13, atol=1e-18)

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from horomass import evaluators as ev
from horomass import metrics as M
from horomass.errors import ExtrapolationUnstable, IncompatibleRule, InvalidExponent
from horomass.quadrature import (ConvergenceSeries, QuadratureRule, RuleKind, SurfaceSpec, extrapolate,
                                 integrate_surface, map_nodes, pairwise_sum, sphere_area, sphere_rule,
                                 tail_bound_horosphere)

SP, HP, IV = RuleKind.SPHERE_PRODUCT, RuleKind.HOROSPHERE_POLAR, RuleKind.INTERVAL
ONE = lambda nd: np.ones(len(nd))  # noqa: E731

# AdS(3, m=1) horosphere masses from the polar mpmath oracle
ADS_HORO = {3.0: 50.275419682086667, 4.0: 50.265976658991221, 5.0: 50.26550705986464,
            6.0: 50.265483682306223}


@pytest.mark.parametrize("r", [0.5, 3.0, 30.0])
def test_sphere_area(r):
    res = integrate_surface(SurfaceSpec.sphere(3, r), ONE)
    assert res.value == pytest.approx(4 * math.pi * r * r, rel=1e-10)


@pytest.mark.parametrize("L,sigma", [(0.0, 1.0), (3.0, 5.0), (6.0, math.exp(9.0))])
def test_face_area(L, sigma):
    res = integrate_surface(SurfaceSpec.face(3, L, sigma), ONE)
    assert res.value == pytest.approx(math.exp(2 * L) * math.pi * sigma**2, rel=1e-10)


@pytest.mark.parametrize("surface", [
    SurfaceSpec.sphere(4, 2.0), SurfaceSpec.face(4, 1.0, 3.0), SurfaceSpec.lateral(3, 2.5, 4.0),
    SurfaceSpec.lateral(4, 1.0, 2.0), SurfaceSpec.edge(3, -1.0, 3.0), SurfaceSpec.edge(4, 2.0, 1.5),
    SurfaceSpec.disk(3, 2.0, (0.3, -0.2), 0.1), SurfaceSpec.horosphere(3, 1.0, 8.0, rho_min=2.0),
    SurfaceSpec.sphere_af(3, 7.0)])
def test_b_areas_match_closed_forms(surface):
    res = integrate_surface(surface, ONE)
    assert res.value == pytest.approx(surface.b_area(), rel=1e-10)


def test_weights_positive():
    for s in (SurfaceSpec.sphere(3, 2.0), SurfaceSpec.face(3, 2.0, 9.0), SurfaceSpec.lateral(3, 2.0, 9.0)):
        assert np.all(s.nodes(QuadratureRule.default_for(s)).weights > 0)


def test_incompatible_rule():
    with pytest.raises(IncompatibleRule):
        integrate_surface(SurfaceSpec.sphere(3, 2.0), ONE, QuadratureRule(HP))


def test_high_dimension_warns():
    with pytest.warns(RuntimeWarning):
        SurfaceSpec.sphere(5, 1.0).nodes(QuadratureRule(SP, angular_order=4))


def test_axisymmetric_integrand_against_1d_reference():
    # f = exp(-rho^2) (1 + rho^2 cos^2 phi) on Sigma_0 with sigma = 3
    def f(nd):
        rho2 = np.sum(nd.x[:, 1:] ** 2, axis=1)
        return np.exp(-rho2) * (1 + nd.x[:, 1] ** 2)

    res = integrate_surface(SurfaceSpec.face(3, 0.0, 3.0), f)
    ref = quad(lambda p: np.exp(-p * p) * (1 + p * p / 2) * p, 0, 3, epsabs=1e-14, epsrel=1e-14)[0] * 2 * math.pi
    assert res.value == pytest.approx(ref, rel=1e-8)


def test_sphere_rule_integrates_polynomials():
    om, w = sphere_rule(2, 8)
    assert pairwise_sum(w * om[:, 2] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-13)
    om, w = sphere_rule(3, 16)
    assert pairwise_sum(w) == pytest.approx(sphere_area(3), rel=1e-13)


def test_order_doubling_is_within_reported_error():
    model = M.ads_schwarzschild(3, 1.0)
    coarse = ev.face_mass(model, 3.0, 20.0, rule=QuadratureRule(HP, 8, 8))
    fine = ev.face_mass(model, 3.0, 20.0, rule=QuadratureRule(HP, 16, 16))
    assert abs(fine.value - coarse.value) <= coarse.quad_error


def test_worker_count_does_not_change_results():
    s = SurfaceSpec.face(3, 1.0, 50.0)
    nodes = s.nodes(QuadratureRule(HP))
    f = lambda nd: np.sin(nd.x[:, 1]) * np.exp(-np.sum(nd.x[:, 1:] ** 2, axis=1) / 100)  # noqa: E731
    a = map_nodes(f, nodes, workers=1)
    b = map_nodes(f, nodes, workers=8)
    assert np.array_equal(a, b)
    assert pairwise_sum(a * nodes.weights) == pairwise_sum(b * nodes.weights)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200))
def test_pairwise_sum_is_close_to_fsum(values):
    assert pairwise_sum(values) == pytest.approx(math.fsum(values), abs=1e-6 * max(1.0, max(map(abs, values))))


def test_tail_bound_scaling():
    b1 = tail_bound_horosphere(3, 3.0, 3.0, 16.0, 1.0)
    assert tail_bound_horosphere(3, 3.0, 6.0, 16.0, 1.0) == pytest.approx(b1, rel=1e-14)
    assert b1 / tail_bound_horosphere(3, 3.0, 3.0, 32.0, 1.0) == pytest.approx(16.0, rel=1e-14)
    assert tail_bound_horosphere(3, 3.0, 3.0, 1e12, 1.0) < 1e-40
    with pytest.raises(InvalidExponent):
        tail_bound_horosphere(3, 0.9, 3.0, 16.0, 1.0)


def test_tail_bound_dominates_measured_tail():
    model = M.ads_schwarzschild(3, 1.0)
    for L in (3.0, 5.0):
        r = ev.horosphere_mass(model, [1, 0, 0], L, rho_max=16.0)
        assert abs(ADS_HORO[L] - r.value) <= r.tail_bound


def test_extrapolate_exact_exponential():
    L = (3.0, 4.0, 5.0)
    fit = extrapolate(ConvergenceSeries("L", L, tuple(5 + 2 * math.exp(-x) for x in L)))
    assert fit.limit == pytest.approx(5.0, abs=1e-10)
    assert fit.rate == pytest.approx(1.0, rel=1e-8)


def test_extrapolate_unequal_spacing():
    L = (2.0, 3.0, 5.0)
    fit = extrapolate(ConvergenceSeries("L", L, tuple(1 - 3 * math.exp(-0.7 * x) for x in L)))
    assert fit.limit == pytest.approx(1.0, abs=1e-10)
    assert fit.rate == pytest.approx(0.7, rel=1e-8)


def test_extrapolate_constant_is_flagged():
    fit = extrapolate(ConvergenceSeries("L", (1.0, 2.0, 3.0), (4.0, 4.0, 4.0)))
    assert fit.converged and fit.limit == 4.0 and math.isnan(fit.rate)


def test_extrapolate_unstable():
    with pytest.raises(ExtrapolationUnstable):
        extrapolate(ConvergenceSeries("L", (1.0, 2.0, 3.0), (1.0, 2.0, 4.0)))
    with pytest.raises(ExtrapolationUnstable):
        extrapolate(ConvergenceSeries("L", (1.0, 2.0, 3.0), (1.0, 2.0, 1.0)))


def test_extrapolate_ads_oracle_series():
    L = tuple(ADS_HORO)
    fit = extrapolate(ConvergenceSeries("L", L, tuple(ADS_HORO.values())))
    assert fit.limit == pytest.approx(16 * math.pi, rel=1e-6)
    # the oracle series converges like e^{-3L}
    assert fit.rate == pytest.approx(3.0, rel=0.25)


def test_uncertainty_is_at_least_last_quad_error():
    L = (3.0, 4.0, 5.0)
    fit = extrapolate(ConvergenceSeries("L", L, tuple(5 + 2 * math.exp(-x) for x in L), (0.0, 0.0, 1e-9)))
    assert fit.uncertainty >= 1e-9

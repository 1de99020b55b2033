import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horomass import metrics as M
from horomass.charts import ChartId, Point, to_chart
from horomass.errors import UnsupportedSurface
from horomass.geomkernel import (ScalarField, area_ratio_minus_one, christoffel, closed_form_second_fundamental,
                                 coordinate_field, hat_radius_field, hessian_scalar, inverse_metric,
                                 level_set_geometry, mean_curvature_difference, radius_field, scalar_curvature)
from horomass.massform import StaticPotential

H, Y, X = ChartId.HYPERBOLOIDAL, ChartId.HALFSPACE, ChartId.HOROSPHERICAL
HYP = M.hyperbolic_background(3)
ADS = M.ads_schwarzschild(3, 1.0)

# AdS(3, m=1), horosphere x1 = 3: H_g - H_b from the polar sympy/mpmath oracle
DELTA_H_ORACLE = [(0.5, -0.00101242023676784), (5.385164807134504, -7.30797962e-8)]


def horo_points(L, count=6, seed=0):
    rng = np.random.default_rng(seed)
    return np.column_stack([np.full(count, L), rng.normal(size=(count, 2)) * 2])


@pytest.mark.parametrize("r", [0.3, 1.0, 5.0, 40.0])
def test_sphere_mean_curvature(r):
    z = np.array([[r, 0, 0], [0, r, 0], [r / math.sqrt(3)] * 3])
    g = level_set_geometry(HYP, radius_field(), Point(H, z), background=True)
    np.testing.assert_allclose(g.H, 2 * math.sqrt(1 + r * r) / r, rtol=1e-12)


@pytest.mark.parametrize("L", [-3.0, 0.0, 2.0, 7.0])
def test_horosphere_mean_curvature(L):
    g = level_set_geometry(HYP, coordinate_field(0), Point(X, horo_points(L)), background=True)
    np.testing.assert_allclose(g.H, 2.0, rtol=1e-12)


def test_fd_path_mean_curvature():
    z = np.array([[3.0, 1.0, -2.0]])
    g = level_set_geometry(HYP.with_fd(), radius_field(), Point(H, z), background=True)
    r = np.linalg.norm(z)
    assert g.H[0] == pytest.approx(2 * math.sqrt(1 + r * r) / r, rel=1e-5)


@pytest.mark.parametrize("chart", [H, Y, X])
def test_background_scalar_curvature(chart):
    p = to_chart(Point(H, np.random.default_rng(3).normal(size=(8, 3)) * 2), chart)
    np.testing.assert_allclose(scalar_curvature(HYP, p), -6.0, atol=1e-6)


@pytest.mark.parametrize("chart", [H, Y, X])
def test_christoffel_symmetric(chart):
    p = to_chart(Point(H, np.random.default_rng(4).normal(size=(4, 3)) * 2), chart)
    G = christoffel(ADS, p)
    np.testing.assert_allclose(G, np.swapaxes(G, -1, -2), atol=1e-14)


@pytest.mark.parametrize("chart", [H, Y, X])
def test_static_potentials_solve_hessian_equation(chart):
    p = to_chart(Point(H, np.random.default_rng(5).normal(size=(5, 3)) * 3), chart)
    jet = HYP.jet(chart, p.coords)
    for V in (StaticPotential.t(3), StaticPotential.z(3, 1), StaticPotential.horosphere([0.6, 0.8, 0.0])):
        val = V.jet(chart, p.coords)[0]
        hess, lap = hessian_scalar(HYP, V.as_field(), p)
        np.testing.assert_allclose(hess, val[:, None, None] * jet.b, rtol=1e-9, atol=1e-9 * np.abs(val).max())
        np.testing.assert_allclose(lap, 3 * val, rtol=1e-9)


@pytest.mark.parametrize("field,chart,pts,orient", [
    (radius_field(), H, np.array([[2.0, 1.0, 0.5], [0.1, -4.0, 2.0]]), 1),
    (coordinate_field(0), X, horo_points(3.0, 3), 1),
    (coordinate_field(0), X, horo_points(-2.0, 3), -1),
    (hat_radius_field(), X, horo_points(1.0, 3), 1),
])
def test_level_set_invariants(field, chart, pts, orient):
    p = Point(chart, pts)
    g = level_set_geometry(ADS, field, p, orient)
    jet = ADS.jet(chart, pts)
    gm = jet.g
    ginv = inverse_metric(jet)
    np.testing.assert_allclose(np.einsum("nij,ni,nj->n", gm, g.nu, g.nu), 1.0, atol=1e-10)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", g.A, g.nu), 0.0, atol=1e-8)
    np.testing.assert_allclose(np.einsum("nij,nij->n", ginv, g.A), g.H, atol=1e-8)


@pytest.mark.parametrize("kind,chart,field,pts,params", [
    ("sphere", H, radius_field(), np.array([[2.0, 1.0, 0.5], [0.0, 0.0, 7.0]]), {}),
    ("horosphere", X, coordinate_field(0), horo_points(1.5, 3), {}),
    ("lateral", X, hat_radius_field(), np.array([[0.5, 3.0, 4.0], [-1.0, 0.0, 5.0]]), {"sigma": 5.0}),
])
def test_closed_form_second_fundamental(kind, chart, field, pts, params):
    g = level_set_geometry(HYP, field, Point(chart, pts), background=True)
    np.testing.assert_allclose(g.A, closed_form_second_fundamental(kind, params, pts), atol=1e-12)


def test_closed_form_rejects_unknown_surfaces():
    with pytest.raises(UnsupportedSurface):
        closed_form_second_fundamental("cube", {}, np.zeros((1, 3)))


@pytest.mark.parametrize("rho,expected", DELTA_H_ORACLE)
def test_mean_curvature_difference_oracle(rho, expected):
    x = np.array([[3.0, rho, 0.0]])
    jet = ADS.jet(X, x)
    _, dF, ddF = coordinate_field(0).jet(X, x)
    dH = mean_curvature_difference(jet, dF, ddF, 1).dH[0]
    assert dH == pytest.approx(expected, rel=1e-7)


def test_precise_difference_matches_direct_subtraction():
    x = horo_points(2.0, 5)
    p = Point(X, x)
    direct = level_set_geometry(ADS, coordinate_field(0), p).H - 2.0
    jet = ADS.jet(X, x)
    _, dF, ddF = coordinate_field(0).jet(X, x)
    cd = mean_curvature_difference(jet, dF, ddF, 1)
    np.testing.assert_allclose(cd.dH, direct, rtol=1e-7, atol=1e-14)
    ratio = level_set_geometry(ADS, coordinate_field(0), p).area_density
    np.testing.assert_allclose(cd.ratio_m1, ratio - 1, rtol=1e-8, atol=1e-16)


@given(st.floats(1e-9, 1e-3))
def test_area_ratio_is_linear_for_tiny_h(lam):
    x = horo_points(2.0, 3)
    jet = ADS.scaled(lam).jet(X, x)
    _, dF, _ = coordinate_field(0).jet(X, x)
    base = ADS.scaled(1e-9).jet(X, x)
    rm = area_ratio_minus_one(jet, dF)
    rb = area_ratio_minus_one(base, dF)
    np.testing.assert_allclose(rm / lam, rb / 1e-9, rtol=1e-3)


def test_fd_scalar_field_matches_analytic():
    f = ScalarField(lambda c, x: np.sum(x * x, axis=-1) ** 0.5)
    x = np.array([[1.0, 2.0, 2.0]])
    v, g, h = f.jet(H, x)
    _, ga, ha = radius_field().jet(H, x)
    np.testing.assert_allclose(g, ga, rtol=1e-8)
    np.testing.assert_allclose(h, ha, rtol=1e-5, atol=1e-6)

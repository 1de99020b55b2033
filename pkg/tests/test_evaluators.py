import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from horomass import evaluators as ev
from horomass import metrics as M
from horomass.errors import DomainError, TailDominates, ValidationError
from horomass.massform import StaticPotential
from oracles import schwarzschild_adm_flux, schwarzschild_adm_geometric

# AdS(3, m=1) reference values from the polar mpmath oracle (tests/oracles.py)
ADS_HORO_L3 = 50.275419682086667
ADS_SPHERE_R100 = 50.265582978550538
AH_ADS = 16 * math.pi  # 2(n-1)|S^{n-1}| m


@pytest.fixture(scope="module")
def ads():
    return M.ads_schwarzschild(3, 1.0)


@pytest.fixture(scope="module")
def bump():
    return M.angular_bump(3, 0.1, 3.0, np.array([0.6, 0.0, 0.8]))


# ------------------------------------------------------------- horospheres

def test_horosphere_large_rho_matches_oracle(ads):
    r = ev.horosphere_mass(ads, [1.0, 0.0, 0.0], 3.0, rho_max=4096.0)
    assert r.value == pytest.approx(ADS_HORO_L3, rel=1e-12)
    assert r.tail_bound < 1e-9


def test_horosphere_adaptive_within_tail(ads):
    r = ev.horosphere_mass(ads, [1.0, 0.0, 0.0], 3.0)
    assert abs(r.value - ADS_HORO_L3) <= r.tail_bound + r.quad_error
    assert r.tail_bound <= 1e-3 * abs(r.value)


def test_horosphere_direction_invariance_for_radial_model(ads):
    a = np.array([0.0, 0.6, 0.8])
    assert ev.horosphere_mass(ads, a, 3.0, rho_max=4096.0).value == pytest.approx(ADS_HORO_L3, rel=1e-12)


def test_horosphere_background_is_zero():
    r = ev.horosphere_mass(M.hyperbolic_background(3), [1.0, 0.0, 0.0], 2.0)
    assert r.value == 0.0 and r.tail_bound == 0.0


def test_tail_dominates(ads):
    with pytest.raises(TailDominates):
        ev.horosphere_mass(ads, [1.0, 0.0, 0.0], 3.0, rho_max=0.05)


def test_horosphere_inside_r_min(ads):
    with pytest.raises(DomainError):
        ev.horosphere_mass(ads, [1.0, 0.0, 0.0], 0.5)


def test_direction_must_be_unit(ads):
    with pytest.raises(ValidationError):
        ev.horosphere_mass(ads, [1.0, 1.0, 0.0], 3.0)


def test_face_mass_approaches_horosphere(ads):
    f = ev.face_mass(ads, 3.0, 50.0)
    assert f.value == pytest.approx(ADS_HORO_L3, rel=1e-6)
    assert f.value < ADS_HORO_L3


def test_euclidean_model_rejected():
    with pytest.raises(ValidationError):
        ev.face_mass(M.schwarzschild_af(1.0), 3.0, 5.0)


# ----------------------------------------------------------------- spheres

def test_sphere_mass_oracle(ads):
    r = ev.sphere_mass_integral(ads, StaticPotential.t(3), 100.0)
    assert r.value == pytest.approx(ADS_SPHERE_R100, rel=1e-11)


def test_sphere_inside_r_min(ads):
    with pytest.raises(DomainError):
        ev.sphere_mass_integral(ads, StaticPotential.t(3), 0.5)


def test_mass_vector_radial_model(ads):
    mv = ev.mass_vector(ads, [40.0, 80.0, 160.0])
    assert mv.p0 == pytest.approx(AH_ADS, rel=1e-6)
    assert np.all(np.abs(mv.p) < 1e-9)
    assert not mv.positivity_violated


def test_mass_vector_points_along_bump_axis(bump):
    mv = ev.mass_vector(bump, [40.0, 80.0, 160.0])
    direction = mv.p / np.linalg.norm(mv.p)
    assert direction == pytest.approx([0.6, 0.0, 0.8], abs=1e-5)
    assert mv.minkowski_sq > 0


def test_ah_geometric_agrees_with_flux(bump):
    # the two forms differ by O(|h|^2), i.e. like r^{n - 2q} = r^{-3}
    diffs = []
    for r in (20.0, 40.0, 80.0):
        a = ev.ah_geometric(bump, r)["p0"].value
        s = ev.sphere_mass_integral(bump, StaticPotential.t(3), r).value
        diffs.append(abs(a - s))
    slope = np.polyfit(np.log([20.0, 40.0, 80.0]), np.log(diffs), 1)[0]
    assert slope == pytest.approx(-3.0, abs=0.1)


# --------------------------------------------------------------------- ADM

@pytest.mark.parametrize("m,r", [(1.0, 100.0), (2.0, 200.0), (0.5, 37.0)])
def test_adm_formulas_match_closed_form(m, r):
    model = M.schwarzschild_af(m)
    assert ev.adm_flux(model, r) == pytest.approx(float(schwarzschild_adm_flux(m, r)), rel=1e-10)
    assert ev.adm_geometric(model, r) == pytest.approx(float(schwarzschild_adm_geometric(m, r)), rel=1e-10)


def test_adm_converges_to_mass():
    model = M.schwarzschild_af(2.0)
    assert ev.adm_flux(model, 1000.0) == pytest.approx(2.0, rel=1e-2)
    assert ev.adm_geometric(model, 1000.0) == pytest.approx(2.0, rel=1e-2)


def test_adm_rejects_hyperbolic(ads):
    with pytest.raises(ValidationError):
        ev.adm_flux(ads, 10.0)


# --------------------------------------------------------- sigma condition

@pytest.mark.parametrize("n,q,k,ok", [(3, 3.0, 1.5, True), (3, 1.6, 0.25, True), (3, 1.6, 0.01, False),
                                      (4, 3.5, 0.1, True), (4, 2.5, 1.0, True), (4, 2.5, 0.1, False)])
def test_sigma_condition(n, q, k, ok):
    assert ev.sigma_condition_check(n, q, k).satisfied is ok


def test_sigma_condition_log_case():
    c = ev.sigma_condition_check(3, 2.0, 0.5)
    assert c.log_factor
    assert c.k_universal == 0.25 and c.k_horosphere == 1.5


@pytest.mark.parametrize("q,k", [(1.5, 1.0), (1.0, 1.0), (3.0, 0.0), (3.0, -1.0)])
def test_sigma_condition_rejects(q, k):
    with pytest.raises(ValidationError):
        ev.sigma_condition_check(3, q, k)


@given(st.integers(3, 6), st.floats(0.01, 1.0), st.floats(0.05, 4.0))
def test_sigma_margin_sign(n, frac, k):
    q = n / 2 + frac * (n / 2 - 1) + 1e-3
    c = ev.sigma_condition_check(n, q, k)
    if q <= n - 1:
        assert c.satisfied == (c.margin > 0)
    else:
        assert c.satisfied


def test_predicted_exponents_ads():
    assert ev.predicted_exponents(3, 3.0, 1.5) == {"F-": -4.0, "E+": -8.5, "E-": -6.5, "S_L": -6.5}
    loose = ev.predicted_exponents(3, 3.0, 1.5, sharp=False)
    assert loose["E-"] == -3.5 and loose["S_L"] == -3.0


@given(st.integers(3, 6), st.floats(0.05, 3.0))
def test_loosened_exponents_are_weaker(n, k):
    q = n - 0.25
    sharp = ev.predicted_exponents(n, q, k)
    loose = ev.predicted_exponents(n, q, k, sharp=False)
    assert loose["S_L"] >= sharp["S_L"] - 1e-12


# ---------------------------------------------------------------- cylinder

def test_cylinder_report_ads(ads):
    rep = ev.cylinder_flux_report(ads, 2.0, 10.0)
    assert rep.consistent
    assert set(rep.faces) == {"F+", "F-", "S_L"}
    assert rep.faces["F+"].direct.value > rep.faces["S_L"].direct.value
    assert rep.total == pytest.approx(sum(f.direct.value for f in rep.faces.values()))


def test_cylinder_report_background_is_zero():
    rep = ev.cylinder_flux_report(M.hyperbolic_background(3), 2.0, 10.0)
    assert rep.total == 0.0
    assert rep.edges == {"E+": 0.0, "E-": 0.0}


def test_cylinder_rejects_bad_potential(ads):
    with pytest.raises(ValidationError):
        ev.cylinder_flux_report(ads, 2.0, 10.0, V=StaticPotential.t(3))


def test_remainder_is_quadratic(bump):
    small = M.angular_bump(3, 0.01, 3.0, np.array([0.6, 0.0, 0.8]))
    big, _ = ev.remainder_integral(bump, 2.0, 20.0)
    little, _ = ev.remainder_integral(small, 2.0, 20.0)
    assert big / little == pytest.approx(100.0, rel=0.05)


# ------------------------------------------------------------------ regions

def test_theta_full_closed_form():
    # |Sigma_L|_b = e^{(n-1)L} pi sigma^2 in n = 3
    assert ev.theta(ev.RegionSpec.full(), 2.0, 3.0) == pytest.approx(math.pi * 9.0, rel=1e-12)


def test_theta_halfspace_is_half():
    full = ev.theta(ev.RegionSpec.full(), 2.0, 3.0)
    assert ev.theta(ev.RegionSpec.halfspace(1, -1.0), 2.0, 3.0) == pytest.approx(full / 2, rel=1e-12)


def test_theta_empty():
    assert ev.theta(ev.RegionSpec.empty(), 2.0, 3.0) == 0.0


def test_cone_theta_decays():
    sig = lambda L: math.exp(1.5 * L)  # noqa: E731
    assert ev.theta_decay_exponent(ev.RegionSpec.cone((0.0, 0.0), 0.3), [2, 3, 4], sig) == pytest.approx(-2.0, abs=1e-9)


def test_cone_adapted_matches_node_count():
    cone = ev.RegionSpec.cone((0.3, 0.0), 0.4)
    a = ev.theta(cone, 1.0, 3.0)
    b = ev.theta(cone, 1.0, 3.0, adapted=False)
    assert b == pytest.approx(a, rel=0.05)


def test_region_algebra():
    y1 = np.array([0.5, 0.5, 2.0])
    yhat = np.array([[0.1, 0.0], [-0.1, 0.0], [3.0, 0.0]])
    h = ev.RegionSpec.halfspace(0, 1.0)
    assert list(h.contains(y1, yhat)) == [True, False, True]
    assert list(ev.RegionSpec.complement(h).contains(y1, yhat)) == [False, True, False]
    assert list(ev.RegionSpec.slab(0, 0.0, 1.0).contains(y1, yhat)) == [True, False, False]
    p = ev.RegionSpec.from_predicate(lambda a, b: a > 1)
    assert list(p.contains(y1, yhat)) == [False, False, True]


def test_empty_region_mass_equals_face(ads):
    a = ev.excluded_region_mass(ads, ev.RegionSpec.empty(), 3.0, 50.0).value
    assert a == pytest.approx(ev.face_mass(ads, 3.0, 50.0).value, rel=1e-14)


def test_halfspace_carries_half_and_warns(ads):
    with pytest.warns(RuntimeWarning):
        r = ev.excluded_region_mass(ads, ev.RegionSpec.halfspace(0, 1.0), 3.0, 50.0)
    assert r.value == pytest.approx(ev.face_mass(ads, 3.0, 50.0).value / 2, rel=1e-9)


def test_cone_removal_keeps_mass(ads):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = ev.excluded_region_mass(ads, ev.RegionSpec.cone((0.0, 0.0), 0.3), 3.0, 50.0)
    assert r.value == pytest.approx(ADS_HORO_L3, rel=1e-3)


def test_extrapolate_readings_adds_tail():
    rs = [ev.MassReading(1.0 + 2.0 ** -k, 1e-14, 0.01) for k in range(6)]
    fit = ev.extrapolate_readings("L", list(range(6)), rs)
    assert fit.uncertainty >= 0.01


def test_reading_rejects_nan():
    with pytest.raises(ValidationError):
        ev.MassReading(math.nan, 0.0)

"""Acceptance checks shared by the selftest command and the test suite.

Each check returns a CheckResult with the worst measured error, the
tolerance it was held to, and a short human-readable detail line.
``tolerance_scale`` multiplies every tolerance (a hook for tampering tests).
"""
from __future__ import annotations

import math
import os
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from . import evaluators as ev
from . import metrics
from .charts import ChartId, Point, rotation_matrix, to_chart
from .geomkernel import coordinate_field, level_set_geometry, radius_field, scalar_curvature
from .massform import StaticPotential

FOUR_PI = 4.0 * math.pi
LS = (3.0, 4.0, 5.0, 6.0)
K_SIGMA = 1.5


def ads_mass(m, n=3):
    return 2.0 * m * (n - 1) * ev.sphere_area(n - 1)


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str
    seconds: float = 0.0


def _result(criterion, name, measured, tol, scale, detail, extra_ok=True):
    ok = bool(extra_ok) and bool(np.isfinite(measured)) and measured <= tol * scale
    return CheckResult(criterion, name, float(measured), tol * scale, ok, detail)


def _rel(a, b):
    return abs(a - b) / abs(b)


def _sigma(L):
    return math.exp(K_SIGMA * L)


# ------------------------------------------------------------------ checks

def check_golden(scale=1.0) -> CheckResult:
    worst, times, parts = 0.0, [], []
    for m in (0.5, 1.0, 2.0):
        t0 = time.perf_counter()
        model = metrics.ads_schwarzschild(3, m)
        rs = [ev.horosphere_mass(model, [1.0, 0.0, 0.0], L) for L in LS]
        fit = ev.extrapolate_readings("L", LS, rs)
        times.append(time.perf_counter() - t0)
        err = _rel(fit.limit, ads_mass(m))
        worst = max(worst, err)
        parts.append(f"m={m}: {fit.limit:.6f} vs {ads_mass(m):.6f}")
    detail = "; ".join(parts) + f"; slowest m took {max(times):.1f}s (limit 60s)"
    return _result(1, "AdS golden value 16*pi*m", worst, 0.01, scale, detail, max(times) <= 60.0)


def cross_evaluator_values():
    model = metrics.ads_schwarzschild(3, 1.0)
    rs = (30.0, 60.0, 120.0)
    t = StaticPotential.t(3)
    sph = [ev.sphere_mass_integral(model, t, r) for r in rs]
    ah = [ev.ah_geometric(model, r)["p0"] for r in rs]
    face = [ev.face_mass(model, L, _sigma(L)) for L in LS]
    horo = [ev.horosphere_mass(model, [1.0, 0.0, 0.0], L) for L in LS]
    return {
        "sphere": ev.extrapolate_readings("r", rs, sph, log_param=True).limit,
        "ah_geometric": ev.extrapolate_readings("r", rs, ah, log_param=True).limit,
        "face": ev.extrapolate_readings("L", LS, face).limit,
        "horosphere": ev.extrapolate_readings("L", LS, horo).limit,
    }


def check_cross(scale=1.0) -> CheckResult:
    vals = cross_evaluator_values()
    v = np.array(list(vals.values()))
    spread = (v.max() - v.min()) / abs(np.mean(v))
    detail = ", ".join(f"{k}={x:.6f}" for k, x in vals.items())
    return _result(2, "cross-evaluator agreement", spread, 0.015, scale, detail)


def check_adm(scale=1.0) -> CheckResult:
    model = metrics.schwarzschild_af(1.0)
    rs = (50.0, 100.0, 200.0)
    flux = [ev.adm_flux(model, r) for r in rs]
    geo = [ev.adm_geometric(model, r) for r in rs]
    mk = lambda vals: [ev.MassReading(v, 0.0) for v in vals]  # noqa: E731
    lf = ev.extrapolate_readings("r", rs, mk(flux), log_param=True).limit
    lg = ev.extrapolate_readings("r", rs, mk(geo), log_param=True).limit
    diff = np.abs(np.subtract(flux, geo))
    slope = float(np.polyfit(np.log(rs), np.log(diff), 1)[0])
    expected = 3 - 2 * 1 - 2
    slope_err = abs(slope - expected) / abs(expected)
    worst = max(_rel(lf, 1.0) / 0.01, _rel(lg, 1.0) / 0.01, slope_err / 0.25)
    detail = f"flux->{lf:.6f}, geometric->{lg:.6f}, difference exponent {slope:.4f} (expected {expected})"
    # normalized: 1.0 means exactly at tolerance
    return _result(3, "ADM flux and geometric forms", worst, 1.0, scale, detail)


def background_values():
    out = {}
    hyp = metrics.hyperbolic_background(3)
    for L in LS:
        out[f"horosphere L={L:g}"] = ev.horosphere_mass(hyp, [1.0, 0.0, 0.0], L).value
        out[f"face L={L:g}"] = ev.face_mass(hyp, L, _sigma(L)).value
        out[f"excluded(half) L={L:g}"] = ev.excluded_region_mass(
            hyp, ev.RegionSpec.halfspace(0), L, _sigma(L), check_decay=False).value
    for L in (3.0, 4.0):
        rep = ev.cylinder_flux_report(hyp, L, _sigma(L))
        for piece in ("F+", "F-", "S_L", "E+", "E-"):
            out[f"cylinder {piece} L={L:g}"] = rep.contribution(piece)
    for r in (10.0, 30.0, 60.0, 120.0):
        out[f"sphere r={r:g}"] = ev.sphere_mass_integral(hyp, StaticPotential.t(3), r).value
        ah = ev.ah_geometric(hyp, r)
        out[f"ah p0 r={r:g}"] = ah["p0"].value
        for i, p in enumerate(ah["p"]):
            out[f"ah p{i + 1} r={r:g}"] = p.value
    flat = metrics.euclidean_background(3)
    for r in (50.0, 100.0, 200.0):
        out[f"adm_flux r={r:g}"] = ev.adm_flux(flat, r)
        out[f"adm_geometric r={r:g}"] = ev.adm_geometric(flat, r)
    return out


def check_backgrounds(scale=1.0) -> CheckResult:
    vals = background_values()
    key = max(vals, key=lambda k: abs(vals[k]))
    return _result(4, "pure backgrounds give zero", abs(vals[key]), 1e-8, scale,
                   f"{len(vals)} readings, largest |{key}| = {abs(vals[key]):.3g}")


def check_decay(scale=1.0) -> CheckResult:
    model = metrics.ads_schwarzschild(3, 1.0)
    study = ev.cylinder_decay_study(model, LS, K_SIGMA)
    worst, parts, bounds_ok = 0.0, [], True
    for piece, pred in study.predicted.items():
        env = study.envelope_measured[piece]
        direct = study.measured[piece]
        worst = max(worst, abs(env - pred) / abs(pred))
        # the signed flux may decay faster than its envelope, never slower
        bounds_ok &= direct <= pred + 0.25 * abs(pred)
        parts.append(f"{piece}: predicted {pred:.3f}, envelope {env:.3f}, flux {direct:.3f}")
    gaps = np.abs(study.gaps)
    bounds_ok &= bool(np.all(np.diff(gaps) < 0))
    parts.append("total - face(F+): " + ", ".join(f"{g:.2e}" for g in gaps))
    return _result(5, "cylinder decay exponents", worst, 0.25, scale, "; ".join(parts), bounds_ok)


def check_remainder(scale=1.0) -> CheckResult:
    bump = metrics.angular_bump(3)
    lams = (1.0, 0.5, 0.25)
    rem = [ev.remainder_integral(bump.scaled(l), 2.0, 20.0)[0] for l in lams]
    slope = float(np.polyfit(np.log(lams), np.log(rem), 1)[0])
    return _result(6, "decomposition remainder is quadratic", abs(slope - 2.0), 0.2, scale,
                   f"fitted exponent {slope:.4f} from {', '.join(f'{r:.3e}' for r in rem)}")


def check_minkowski(scale=1.0) -> CheckResult:
    bump = metrics.angular_bump(3, amplitude=0.1, axis=np.array([0.6, 0.0, 0.8]))
    R = rotation_matrix(3, 0, 1, 0.7) @ rotation_matrix(3, 1, 2, 0.4)
    rs = (40.0, 80.0, 160.0)
    a = ev.mass_vector(bump, rs)
    b = ev.mass_vector(bump.rotated(R), rs)
    err = _rel(b.minkowski_sq, a.minkowski_sq)
    return _result(7, "Minkowski length is chart invariant", err, 0.005, scale,
                   f"m^2 = {a.minkowski_sq:.6f} vs {b.minkowski_sq:.6f} (p = {np.round(a.p, 4)} vs "
                   f"{np.round(b.p, 4)})")


def check_theta(scale=1.0) -> CheckResult:
    model = metrics.ads_schwarzschild(3, 1.0)
    half = ev.RegionSpec.halfspace(0)
    cone = ev.RegionSpec.cone((0.0, 0.0), 0.5)
    full = ev.RegionSpec.full()
    half_err = max(abs(ev.theta(half, L, _sigma, 3) / ev.theta(full, L, _sigma, 3) - 0.5) for L in LS)
    cone_decay = ev.theta_decay_exponent(cone, LS, _sigma, 3)
    cone_err, half_mass_err = 0.0, 0.0
    for L in LS:
        fm = ev.face_mass(model, L, _sigma(L)).value
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cone_err = max(cone_err, _rel(ev.excluded_region_mass(model, cone, L, _sigma).value, fm))
            half_mass_err = max(half_mass_err, abs(ev.excluded_region_mass(model, half, L, _sigma).value / fm
                                                   - 0.5) / 0.5)
    worst = max(half_err / 1e-6, cone_err / 0.015, half_mass_err / 0.015)
    detail = (f"half-space Theta ratio error {half_err:.2e}; cone Theta exponent {cone_decay:.3f} "
              f"(threshold {model.q - 3:g}); cone excluded/face error {cone_err:.2e}; "
              f"half-footprint excluded/face vs 1/2 error {half_mass_err:.2e}")
    return _result(8, "Theta regions", worst, 1.0, scale, detail, cone_decay < model.q - 3)


def geometry_errors():
    hyp = metrics.hyperbolic_background(3)
    fd = hyp.with_fd()
    rng = np.random.default_rng(7)
    out = {"H_sphere": 0.0, "H_sphere_fd": 0.0, "H_horo": 0.0, "H_horo_fd": 0.0}
    for r in (0.5, 2.0, 10.0, 50.0):
        d = rng.normal(size=(8, 3))
        z = r * d / np.linalg.norm(d, axis=1)[:, None]
        p = Point(ChartId.HYPERBOLOIDAL, z)
        exact = 2.0 * math.sqrt(1 + r * r) / r
        for key, mdl in (("H_sphere", hyp), ("H_sphere_fd", fd)):
            H = level_set_geometry(mdl, radius_field(), p, background=True).H
            out[key] = max(out[key], float(np.max(np.abs(H - exact))) / exact)
    for L in (-2.0, 0.0, 3.0, 6.0):
        x = np.column_stack([np.full(8, L), rng.normal(size=(8, 2)) * 3])
        p = Point(ChartId.HOROSPHERICAL, x)
        for key, mdl in (("H_horo", hyp), ("H_horo_fd", fd)):
            H = level_set_geometry(mdl, coordinate_field(0), p, background=True).H
            out[key] = max(out[key], float(np.max(np.abs(H - 2.0))) / 2.0)
    base = Point(ChartId.HYPERBOLOIDAL, rng.normal(size=(6, 3)))
    for chart in (ChartId.HYPERBOLOIDAL, ChartId.HALFSPACE, ChartId.HOROSPHERICAL):
        R = scalar_curvature(hyp, to_chart(base, chart))
        out[f"R_b {chart.value}"] = float(np.max(np.abs(R + 6.0)))
    return out


def check_geometry(scale=1.0) -> CheckResult:
    e = geometry_errors()
    tol = {"H_sphere": 1e-10, "H_horo": 1e-10, "H_sphere_fd": 1e-5, "H_horo_fd": 1e-5}
    worst = max(e[k] / tol.get(k, 1e-6) for k in e)
    return _result(9, "geometry oracles", worst, 1.0, scale, ", ".join(f"{k}={v:.2e}" for k, v in e.items()))


REFERENCE_CONFIG = """\
model.name = ads
model.m = 1
evaluator.name = horosphere
sweep.L = 3,4,5
"""


@contextmanager
def _threads(k):
    old = os.environ.get("HOROMASS_THREADS")
    os.environ["HOROMASS_THREADS"] = str(k)
    try:
        yield
    finally:
        if old is None:
            del os.environ["HOROMASS_THREADS"]
        else:
            os.environ["HOROMASS_THREADS"] = old


def reference_csv(workers: int, config: str = REFERENCE_CONFIG) -> str:
    from .cli import ExperimentConfig, mass_csv, run_mass

    with _threads(workers):
        return mass_csv(run_mass(ExperimentConfig.from_text(config)))


def check_determinism(scale=1.0) -> CheckResult:
    one, eight = reference_csv(1), reference_csv(8)
    same = one == eight
    # measured: 0 when identical, 1 otherwise; a zero tolerance still passes identical output
    return _result(10, "byte-identical CSV for 1 and 8 workers", 0.0 if same else 1.0, 0.0, scale,
                   f"{len(one)} bytes, identical={same}", same and scale >= 0)


CHECKS: dict[int, Callable[..., CheckResult]] = {
    1: check_golden, 2: check_cross, 3: check_adm, 4: check_backgrounds, 5: check_decay,
    6: check_remainder, 7: check_minkowski, 8: check_theta, 9: check_geometry, 10: check_determinism,
}


def run_check(criterion: int, tolerance_scale: float = 1.0) -> CheckResult:
    t0 = time.perf_counter()
    res = CHECKS[criterion](tolerance_scale)
    return CheckResult(res.criterion, res.name, res.measured, res.tolerance, res.passed, res.detail,
                       time.perf_counter() - t0)


def run_checks(only: Optional[Iterable[int]] = None, tolerance_scale: float = 1.0) -> list:
    return [run_check(c, tolerance_scale) for c in (sorted(only) if only else sorted(CHECKS))]


def format_line(r: CheckResult) -> str:
    status = "PASS" if r.passed else "FAIL"
    return (f"[{status}] criterion {r.criterion:>2} {r.name}: measured {r.measured:.3g} "
            f"(tolerance {r.tolerance:.3g}, {r.seconds:.1f}s) {r.detail}")


def format_table(results) -> str:
    lines = [format_line(r) for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} checks passed")
    return "\n".join(lines)

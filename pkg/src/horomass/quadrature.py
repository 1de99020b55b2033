"""Deterministic surface quadrature, tail bounds and convergence extrapolation."""
from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .charts import ChartId
from .errors import ExtrapolationUnstable, IncompatibleRule, InvalidExponent, ValidationError
from .geomkernel import ScalarField, coordinate_field, hat_radius_field, radius_field

CHUNK = 1024


def sphere_area(d: int) -> float:
    """omega_d, the area of the unit sphere S^d."""
    return 2.0 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


# --------------------------------------------------------------- 1-D rules

@lru_cache(maxsize=None)
def _leggauss(order):
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre(order: int, a: float, b: float):
    t, w = _leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), half * w


def composite_gauss_legendre(edges: Sequence[float], order: int):
    xs, ws = zip(*(gauss_legendre(order, a, b) for a, b in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)


def trapezoid_circle(count: int):
    """Offset trapezoid nodes on [0, 2 pi): no node ever sits on phi = 0 or pi."""
    phi = (np.arange(count) + 0.5) * (2.0 * math.pi / count)
    return phi, np.full(count, 2.0 * math.pi / count)


def geometric_edges(lo: float, hi: float, first: float = 0.25):
    """Panel edges lo, ..., hi refined geometrically (ratio 2) from ``first``."""
    if hi <= lo:
        raise ValidationError("empty radial interval")
    pts = [lo]
    e = first
    while e < hi * (1 - 1e-12):
        if e > lo * (1 + 1e-12):
            pts.append(e)
        e *= 2.0
    pts.append(hi)
    return np.asarray(pts)


def sphere_rule(d: int, order: int):
    """Nodes (M, d+1) and weights (sum = omega_d) on the unit sphere S^d.

    The polar axis is the first coordinate: Gauss-Legendre in cos(theta) for
    S^2, Gauss-Legendre in theta with sin^{d-1} weight for d >= 3, and an
    offset trapezoid rule in the periodic angle.
    """
    if d == 1:
        phi, w = trapezoid_circle(2 * order)
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), w
    if d == 2:
        c, wc = gauss_legendre(order, -1.0, 1.0)
        inner, wi = sphere_rule(1, order)
        s = np.sqrt(1.0 - c * c)
    else:
        th, wt = gauss_legendre(order, 0.0, math.pi)
        c, s = np.cos(th), np.sin(th)
        wc = wt * s ** (d - 1)
        inner, wi = sphere_rule(d - 1, order)
    pts = np.concatenate([np.repeat(c, len(wi))[:, None],
                          np.repeat(s, len(wi))[:, None] * np.tile(inner, (len(c), 1))], axis=1)
    return pts, np.repeat(wc, len(wi)) * np.tile(wi, len(c))


# ----------------------------------------------------------- surface specs

class SurfaceKind(enum.Enum):
    SPHERE = "sphere"
    HOROSPHERE = "horosphere"
    HOROFACE = "horoface"
    LATERAL = "lateral"
    EDGE = "edge"
    DISK = "disk"
    SPHERE_AF = "sphere_af"


class RuleKind(enum.Enum):
    SPHERE_PRODUCT = "sphere_product"
    HOROSPHERE_POLAR = "horosphere_polar"
    INTERVAL = "interval"


_COMPATIBLE = {
    SurfaceKind.SPHERE: RuleKind.SPHERE_PRODUCT,
    SurfaceKind.SPHERE_AF: RuleKind.SPHERE_PRODUCT,
    SurfaceKind.HOROSPHERE: RuleKind.HOROSPHERE_POLAR,
    SurfaceKind.HOROFACE: RuleKind.HOROSPHERE_POLAR,
    SurfaceKind.DISK: RuleKind.HOROSPHERE_POLAR,
    SurfaceKind.LATERAL: RuleKind.INTERVAL,
    SurfaceKind.EDGE: RuleKind.INTERVAL,
}


@dataclass(frozen=True)
class QuadratureRule:
    """Rule orders: Gauss-Legendre points per radial/axial panel and angular order.

    Radial and axial directions use composite panels (geometric in rho,
    unit length in x_1); the angular order is the number of Gauss-Legendre
    polar nodes, with twice as many trapezoid nodes in the periodic angle.
    """

    kind: RuleKind
    radial_order: int = 16
    angular_order: int = 16

    def __post_init__(self):
        if self.radial_order < 2 or self.angular_order < 2:
            raise ValidationError("rule orders must be at least 2")

    def halved(self) -> "QuadratureRule":
        return replace(self, radial_order=max(2, self.radial_order // 2),
                       angular_order=max(2, self.angular_order // 2))

    @classmethod
    def default_for(cls, surface: "SurfaceSpec") -> "QuadratureRule":
        kind = _COMPATIBLE[surface.kind]
        # whole spheres see angular structure of h directly; give them more nodes
        return cls(kind, angular_order=32) if kind is RuleKind.SPHERE_PRODUCT else cls(kind)


@dataclass(frozen=True)
class SurfaceNodes:
    """Quadrature nodes of a surface in one chart.

    ``weights`` already include the background area element.  ``level``
    is the function whose level set is the surface (None for edges) and
    ``orientation`` the sign that turns its gradient into the chosen normal.
    """

    chart: ChartId
    x: np.ndarray
    weights: np.ndarray
    level: Optional[ScalarField]
    orientation: int

    def __len__(self):
        return len(self.weights)

    def take(self, sl: slice) -> "SurfaceNodes":
        return replace(self, x=self.x[sl], weights=self.weights[sl])


@dataclass(frozen=True)
class SurfaceSpec:
    """A parametrized surface of one of the supported families.

    Horosphere-family surfaces live in horospherical coordinates at
    x_1 = L and are oriented toward increasing x_1 (toward y_1 = 0) unless
    ``orientation`` is -1 (the bottom face of a cylinder).  ``rho_min`` turns
    a face into an annulus; DISK is an off-center footprint disk used by
    region integrals.
    """

    kind: SurfaceKind
    n: int
    r: float = 0.0
    L: float = 0.0
    sigma: float = 0.0
    rho_min: float = 0.0
    rho_max: float = 0.0
    center: tuple = ()
    orientation: int = 1

    # constructors
    @classmethod
    def sphere(cls, n, r):
        return cls(SurfaceKind.SPHERE, n, r=float(r))

    @classmethod
    def sphere_af(cls, n, r):
        return cls(SurfaceKind.SPHERE_AF, n, r=float(r))

    @classmethod
    def horosphere(cls, n, L, rho_max, rho_min=0.0):
        return cls(SurfaceKind.HOROSPHERE, n, L=float(L), rho_max=float(rho_max), rho_min=float(rho_min))

    @classmethod
    def face(cls, n, L, sigma, orientation=1):
        return cls(SurfaceKind.HOROFACE, n, L=float(L), sigma=float(sigma), rho_max=float(sigma),
                   orientation=orientation)

    @classmethod
    def lateral(cls, n, L, sigma):
        return cls(SurfaceKind.LATERAL, n, L=float(L), sigma=float(sigma))

    @classmethod
    def edge(cls, n, x1, sigma):
        return cls(SurfaceKind.EDGE, n, L=float(x1), sigma=float(sigma))

    @classmethod
    def disk(cls, n, L, center, radius):
        return cls(SurfaceKind.DISK, n, L=float(L), center=tuple(map(float, center)), rho_max=float(radius))

    @property
    def chart(self) -> ChartId:
        if self.kind is SurfaceKind.SPHERE:
            return ChartId.HYPERBOLOIDAL
        if self.kind is SurfaceKind.SPHERE_AF:
            return ChartId.CARTESIAN
        return ChartId.HOROSPHERICAL

    def b_area(self) -> float:
        """Closed-form area with respect to the background metric."""
        n = self.n
        if self.kind in (SurfaceKind.SPHERE, SurfaceKind.SPHERE_AF):
            return sphere_area(n - 1) * self.r ** (n - 1)
        if self.kind in (SurfaceKind.HOROSPHERE, SurfaceKind.HOROFACE, SurfaceKind.DISK):
            ball = sphere_area(n - 2) / (n - 1)
            return math.exp((n - 1) * self.L) * ball * (self.rho_max ** (n - 1) - self.rho_min ** (n - 1))
        if self.kind is SurfaceKind.LATERAL:
            w = sphere_area(n - 2) * self.sigma ** (n - 2)
            if n == 2:
                return w * 2 * self.L
            return w * 2.0 * math.sinh((n - 2) * self.L) / (n - 2)
        if self.kind is SurfaceKind.EDGE:
            return sphere_area(n - 2) * math.exp((n - 2) * self.L) * self.sigma ** (n - 2)
        raise ValidationError(self.kind)

    def nodes(self, rule: QuadratureRule) -> SurfaceNodes:
        if _COMPATIBLE[self.kind] is not rule.kind:
            raise IncompatibleRule(f"rule {rule.kind.value} cannot integrate a {self.kind.value} surface")
        n = self.n
        if n >= 5:
            warnings.warn("n >= 5: tensor-product node counts grow quickly", RuntimeWarning, stacklevel=2)
        if self.kind in (SurfaceKind.SPHERE, SurfaceKind.SPHERE_AF):
            om, w = sphere_rule(n - 1, rule.angular_order)
            return SurfaceNodes(self.chart, self.r * om, w * self.r ** (n - 1), radius_field(), 1)

        om, wa = sphere_rule(n - 2, rule.angular_order)
        if self.kind is SurfaceKind.EDGE:
            x = np.concatenate([np.full((len(wa), 1), self.L), self.sigma * om], axis=1)
            return SurfaceNodes(self.chart, x, wa * math.exp((n - 2) * self.L) * self.sigma ** (n - 2), None, 1)
        if self.kind is SurfaceKind.LATERAL:
            panels = max(1, int(math.ceil(2 * self.L)))
            t, wt = composite_gauss_legendre(np.linspace(-self.L, self.L, panels + 1), rule.radial_order)
            x1 = np.repeat(t, len(wa))
            xh = np.tile(self.sigma * om, (len(t), 1))
            w = np.repeat(wt * np.exp((n - 2) * t), len(wa)) * np.tile(wa, len(t)) * self.sigma ** (n - 2)
            return SurfaceNodes(self.chart, np.concatenate([x1[:, None], xh], axis=1), w, hat_radius_field(), 1)

        # horosphere family: polar coordinates in x_hat
        if self.kind is SurfaceKind.DISK:
            edges = np.linspace(0.0, self.rho_max, 5)
            center = np.asarray(self.center)
        else:
            edges = geometric_edges(self.rho_min, self.rho_max)
            center = np.zeros(n - 1)
        rho, wr = composite_gauss_legendre(edges, rule.radial_order)
        xh = np.repeat(rho, len(wa))[:, None] * np.tile(om, (len(rho), 1)) + center
        w = (np.repeat(wr * rho ** (n - 2), len(wa)) * np.tile(wa, len(rho))
             * math.exp((n - 1) * self.L))
        x = np.concatenate([np.full((len(w), 1), self.L), xh], axis=1)
        return SurfaceNodes(self.chart, x, w, coordinate_field(0), self.orientation)


# -------------------------------------------------------------- summation

def pairwise_sum(values) -> float:
    """Sum with a fixed binary tree determined only by the array length."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


_default_workers = 1


def set_default_workers(k: int) -> None:
    """Worker count used when HOROMASS_THREADS is unset."""
    global _default_workers
    _default_workers = max(1, int(k))


def worker_count() -> int:
    env = os.environ.get("HOROMASS_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError as exc:
            raise ValidationError(f"HOROMASS_THREADS must be an integer, got {env!r}") from exc
        return max(1, k)
    return _default_workers


def map_nodes(func: Callable, nodes: SurfaceNodes, workers: Optional[int] = None):
    """Evaluate ``func`` over fixed-size node chunks, preserving order.

    Chunk boundaries do not depend on the worker count, so per-node values
    (and everything reduced from them) are bit-identical for any ``workers``.
    """
    k = worker_count() if workers is None else workers
    chunks = [nodes.take(slice(i, i + CHUNK)) for i in range(0, len(nodes), CHUNK)]
    if k <= 1 or len(chunks) == 1:
        parts = [np.asarray(func(c)) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=k) as ex:
            parts = [np.asarray(p) for p in ex.map(func, chunks)]
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class QuadResult:
    value: float
    quad_error: float
    nodes: int


def integrate_surface(surface: SurfaceSpec, integrand: Callable, rule: Optional[QuadratureRule] = None,
                      workers: Optional[int] = None) -> QuadResult:
    """Sum of weight * integrand over the rule's nodes, with a half-order error estimate.

    ``integrand`` maps a SurfaceNodes chunk to per-node values.
    """
    rule = QuadratureRule.default_for(surface) if rule is None else rule
    full = surface.nodes(rule)
    half = surface.nodes(rule.halved())
    v_full = pairwise_sum(full.weights * map_nodes(integrand, full, workers))
    v_half = pairwise_sum(half.weights * map_nodes(integrand, half, workers))
    return QuadResult(v_full, abs(v_full - v_half), len(full))


# -------------------------------------------------------------- tail bound

def tail_constant(n: int, q: float, C_h: float) -> float:
    """C-tilde of the horosphere tail estimate.

    Uses |2 V (H_b - H_g)| dsigma_g <= C1 (|h|_b + |grad h|_b) V dsigma_b with
    C1 = 2 * 3 sqrt(n) * 1.5, and r >= e^L rho^2 / 2 on the horosphere.
    """
    C1 = 2.0 * 3.0 * math.sqrt(n) * 1.5
    return sphere_area(n - 2) * C1 * C_h * 2.0**q / (2.0 * q - n + 1.0)


def tail_bound_horosphere(n: int, q: float, L: float, rho_max: float, C_h: float) -> float:
    """Bound on the horosphere integral beyond rho_max: C e^{L(n-q)} rho_max^{n-1-2q}."""
    expo = n - 1 - 2 * q
    if expo >= 0:
        raise InvalidExponent(f"n-1-2q = {expo} must be negative")
    if not rho_max > 0:
        raise ValidationError("rho_max must be positive")
    if C_h == 0:
        return 0.0
    return tail_constant(n, q, C_h) * math.exp(L * (n - q)) * rho_max**expo


# ----------------------------------------------------------- extrapolation

@dataclass(frozen=True)
class ConvergenceSeries:
    """Values along a parameter sweep; ``log_param`` fits in ln(parameter) (for r-sweeps)."""

    param_name: str
    params: tuple
    values: tuple
    quad_errors: tuple = ()
    log_param: bool = False

    def __post_init__(self):
        if len(self.params) != len(self.values):
            raise ValidationError("params and values differ in length")
        if not self.quad_errors:
            object.__setattr__(self, "quad_errors", (0.0,) * len(self.values))

    @property
    def s(self):
        p = np.asarray(self.params, dtype=float)
        return np.log(p) if self.log_param else p


@dataclass(frozen=True)
class Fit:
    limit: float
    amplitude: float
    rate: float
    residual: float
    uncertainty: float
    converged: bool = False
    note: str = ""


def _solve_rate(s, v):
    """beta with (v3 - v2)/(v2 - v1) = (e^{-b s3} - e^{-b s2}) / (e^{-b s2} - e^{-b s1})."""
    d1, d2 = v[1] - v[0], v[2] - v[1]
    ratio = d2 / d1
    if not 0.0 < ratio < 1.0:
        raise ExtrapolationUnstable(f"difference ratio {ratio:.4g} is not in (0, 1)")
    h1, h2 = s[1] - s[0], s[2] - s[1]
    if math.isclose(h1, h2, rel_tol=1e-9):
        return -math.log(ratio) / h1

    def f(b):
        return math.exp(-b * h1) * (-math.expm1(-b * h2)) / (-math.expm1(-b * h1)) - ratio

    lo, hi = 1e-8, 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            raise ExtrapolationUnstable("rate root not bracketed")
    return brentq(f, lo, hi, xtol=1e-14)


def extrapolate(series: ConvergenceSeries, atol: float = 0.0) -> Fit:
    """Fit v = v_inf + c e^{-beta s} through the last three points.

    Earlier points give the residual.  If successive differences are below
    the noise floor (``atol`` plus quadrature errors) the series counts as
    converged and its last value is returned.
    """
    s = series.s
    v = np.asarray(series.values, dtype=float)
    qe = np.asarray(series.quad_errors, dtype=float)
    if len(v) < 3:
        raise ValidationError("extrapolation needs at least three points")
    if np.any(np.diff(s) <= 0):
        raise ValidationError("parameters must be strictly increasing")
    noise = atol + 2.0 * float(qe[-3:].max()) + 1e-13 * float(np.abs(v[-3:]).max())
    s3, v3 = s[-3:], v[-3:]
    d = np.diff(v3)
    if np.all(np.abs(d) <= noise):
        return Fit(float(v3[-1]), 0.0, float("nan"), float(np.ptp(v)), max(float(np.abs(d).max()), float(qe[-1])),
                   converged=True, note="differences below noise floor")
    beta = _solve_rate(s3, v3)
    if not beta > 0:
        raise ExtrapolationUnstable(f"fitted rate {beta} is not positive")
    e = np.exp(-beta * (s3 - s3[0]))
    c = (v3[1] - v3[0]) / (e[1] - e[0])
    limit = v3[0] - c * e[0]
    amp = c * math.exp(beta * s3[0])
    model = limit + c * np.exp(-beta * (s - s3[0]))
    extra = np.abs(v[:-3] - model[:-3])
    residual = float(extra.max()) if extra.size else 0.0
    uncertainty = max(residual, float(qe[-1]))
    return Fit(float(limit), float(amp), float(beta), residual, uncertainty)

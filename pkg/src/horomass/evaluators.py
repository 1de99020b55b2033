"""Mass evaluators on spheres, horospheres, horosphere faces and cylinder boundaries."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .charts import ChartId, rotation_to_e1
from .errors import DomainError, TailDominates, ValidationError
from .geomkernel import coordinate_field, hat_radius_field, mean_curvature_difference
from .massform import (StaticPotential, decompose, mass_one_form_from_jet, surface_frame,
                       tangential_X)
from .metrics import Background, MetricModel, tensor_norms_b
from .quadrature import (ConvergenceSeries, Fit, QuadratureRule, RuleKind, SurfaceNodes, SurfaceSpec,
                         extrapolate, map_nodes, pairwise_sum, sphere_area, tail_bound_horosphere)


@dataclass(frozen=True)
class MassReading:
    value: float
    quad_error: float
    tail_bound: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValidationError("mass reading is not finite")


def _integrate(surface: SurfaceSpec, integrand, rule: Optional[QuadratureRule] = None):
    """Like quadrature.integrate_surface but for integrands with several columns."""
    rule = QuadratureRule.default_for(surface) if rule is None else rule
    out = []
    for r in (rule, rule.halved()):
        nodes = surface.nodes(r)
        vals = map_nodes(integrand, nodes)
        w = nodes.weights.reshape((-1,) + (1,) * (vals.ndim - 1))
        wv = (w * vals).reshape(len(nodes), -1)
        out.append(np.array([pairwise_sum(wv[:, j]) for j in range(wv.shape[1])]))
    return out[0], np.abs(out[0] - out[1])


def _require_hyperbolic(model: MetricModel):
    if model.background is not Background.HYPERBOLIC:
        raise ValidationError(f"{model.name}: this evaluator needs a hyperbolic-background model")


def _require_euclidean(model: MetricModel):
    if model.background is not Background.EUCLIDEAN:
        raise ValidationError(f"{model.name}: this evaluator needs a Euclidean-background model")


def _check_horo_domain(model: MetricModel, x1: float):
    # the closest point of {x_1 = L} to the origin has r = sinh|L|
    if model.r_min > 0 and math.sinh(abs(x1)) <= model.r_min:
        raise DomainError(f"surface at x1={x1} reaches r = sinh|x1| = {math.sinh(abs(x1)):.4g} "
                          f"<= r_min = {model.r_min:.4g}")


def _oriented(model: MetricModel, a):
    """Model rotated so that the horosphere direction a becomes e_1."""
    a = np.asarray(a, dtype=float)
    if a.shape != (model.n,):
        raise ValidationError(f"direction must have {model.n} components")
    return model.rotated(rotation_to_e1(a))


def _potentials_matrix(n, potentials: Sequence[StaticPotential]):
    """Columns (c_t, a) so that U(V_k) = U(t) c_t - sum_i a_i U(z_i)."""
    return potentials


# ------------------------------------------------------------------ spheres

def _sphere_flux_integrand(model: MetricModel, potentials):
    def f(nd: SurfaceNodes):
        jet = model.jet(nd.chart, nd.x)
        _, dF, ddF = nd.level.jet(nd.chart, nd.x)
        frame = surface_frame(jet, dF, ddF, 1)
        cols = []
        for V in potentials:
            v, dV, _ = V.jet(nd.chart, nd.x)
            cols.append(mass_one_form_from_jet(jet, v, dV, frame.nu))
        return np.stack(cols, axis=1)
    return f


def sphere_mass_integral(model: MetricModel, V: StaticPotential, r: float,
                         rule: Optional[QuadratureRule] = None) -> MassReading:
    """Integral of U(V)(nu0) over the coordinate sphere S_r (outward normal)."""
    _require_hyperbolic(model)
    if r <= model.r_min:
        raise DomainError(f"sphere radius {r} is inside r_min={model.r_min:.4g}")
    val, err = _integrate(SurfaceSpec.sphere(model.n, r), _sphere_flux_integrand(model, [V]), rule)
    return MassReading(float(val[0]), float(err[0]), 0.0, {"r": r})


@dataclass(frozen=True)
class MassVector:
    p0: float
    p: np.ndarray
    readings: dict
    fits: dict

    @property
    def minkowski_sq(self) -> float:
        return self.p0**2 - float(np.sum(self.p**2))

    @property
    def positivity_violated(self) -> bool:
        return self.p0 < float(np.linalg.norm(self.p))


def mass_vector(model: MetricModel, r_list: Sequence[float], rule: Optional[QuadratureRule] = None) -> MassVector:
    """Sphere fluxes for V = t, z_1..z_n at each r, extrapolated in ln r."""
    _require_hyperbolic(model)
    r_list = [float(r) for r in r_list]
    if len(r_list) < 3 or np.any(np.diff(r_list) <= 0):
        raise ValidationError("r_list must be increasing with at least three entries")
    n = model.n
    pots = [StaticPotential.t(n)] + [StaticPotential.z(n, i) for i in range(n)]
    rows = []
    for r in r_list:
        if r <= model.r_min:
            raise DomainError(f"sphere radius {r} is inside r_min={model.r_min:.4g}")
        rows.append(_integrate(SurfaceSpec.sphere(n, r), _sphere_flux_integrand(model, pots), rule))
    names = ["p0"] + [f"p{i + 1}" for i in range(n)]
    readings, fits, limits = {}, {}, []
    scale = max(max(abs(v) for v in row[0]) for row in rows)
    for k, name in enumerate(names):
        vals = tuple(float(row[0][k]) for row in rows)
        errs = tuple(float(row[1][k]) for row in rows)
        readings[name] = [MassReading(v, e, 0.0, {"r": r}) for v, e, r in zip(vals, errs, r_list)]
        fit = extrapolate(ConvergenceSeries("r", tuple(r_list), vals, errs, log_param=True),
                          atol=1e-12 * scale)
        fits[name] = fit
        limits.append(fit.limit)
    return MassVector(limits[0], np.asarray(limits[1:]), readings, fits)


def ah_geometric(model: MetricModel, r: float, rule: Optional[QuadratureRule] = None) -> dict:
    """Mean-curvature and area-deficit estimates of p0 and p_i on S_r."""
    _require_hyperbolic(model)
    if r <= model.r_min:
        raise DomainError(f"sphere radius {r} is inside r_min={model.r_min:.4g}")
    n = model.n

    def f(nd: SurfaceNodes):
        jet = model.jet(nd.chart, nd.x)
        _, dF, ddF = nd.level.jet(nd.chart, nd.x)
        cd = mean_curvature_difference(jet, dF, ddF, 1)
        t = np.sqrt(1.0 + r * r)
        gain = -cd.dH * (1.0 + cd.ratio_m1)
        cols = [2.0 * (t * gain - cd.ratio_m1 / r)]
        cols += [2.0 * nd.x[:, i] * gain for i in range(n)]
        return np.stack(cols, axis=1)

    val, err = _integrate(SurfaceSpec.sphere(n, r), f, rule)
    return {"p0": MassReading(float(val[0]), float(err[0]), 0.0, {"r": r}),
            "p": [MassReading(float(v), float(e), 0.0, {"r": r}) for v, e in zip(val[1:], err[1:])]}


# --------------------------------------------------------------- horospheres

def _mean_curvature_integrand(model: MetricModel, V: StaticPotential, mask=None):
    """2 V (H_b - H_g) dsigma_g / dsigma_b, optionally multiplied by a node mask."""
    def f(nd: SurfaceNodes):
        jet = model.jet(nd.chart, nd.x)
        v, _, _ = V.jet(nd.chart, nd.x)
        _, dF, ddF = nd.level.jet(nd.chart, nd.x)
        cd = mean_curvature_difference(jet, dF, ddF, nd.orientation)
        out = -2.0 * v * cd.dH * (1.0 + cd.ratio_m1)
        if mask is not None:
            out = out * mask(nd)
        return out
    return f


def _measured_Ch(model: MetricModel, nodes: SurfaceNodes) -> float:
    from .charts import Point, radius

    def f(nd):
        jet = model.jet(nd.chart, nd.x)
        hn, dn = tensor_norms_b(jet)
        return (hn + dn) * radius(Point(nd.chart, nd.x)) ** model.q
    return float(np.max(map_nodes(f, nodes)))


def _horo_potential(n):
    e1 = np.zeros(n)
    e1[0] = 1.0
    return StaticPotential.horosphere(e1)


def horosphere_mass(model: MetricModel, a, L: float, rho_max: Optional[float] = None,
                    rule: Optional[QuadratureRule] = None, rho_start: float = 16.0,
                    tail_rtol: float = 1e-3, max_doublings: int = 12) -> MassReading:
    """2 * integral of V (H_b - H_g) over {x_1 = L, rho <= rho_max} for the direction a.

    With ``rho_max=None`` the truncation radius starts at ``rho_start`` and doubles
    (adding annuli) until the analytic tail bound falls below tail_rtol * |value|.
    """
    _require_hyperbolic(model)
    _check_horo_domain(model, L)
    n = model.n
    m = _oriented(model, a)
    V = _horo_potential(n)
    rule = rule or QuadratureRule(RuleKind.HOROSPHERE_POLAR)
    integrand = _mean_curvature_integrand(m, V)
    exact = m.is_exact_background

    def piece(lo, hi):
        s = SurfaceSpec.horosphere(n, L, hi, rho_min=lo)
        val, err = _integrate(s, integrand, rule)
        ch = 0.0 if exact else _measured_Ch(m, s.nodes(rule))
        return float(val[0]), float(err[0]), ch

    def bound(rho, ch):
        return 0.0 if exact else tail_bound_horosphere(n, model.q, L, rho, ch)

    if rho_max is not None:
        value, qerr, ch = piece(0.0, float(rho_max))
        tail = bound(float(rho_max), ch)
        doublings = 0
    else:
        rho = float(rho_start)
        value, qerr, ch = piece(0.0, rho)
        tail = bound(rho, ch)
        doublings = 0
        while tail > tail_rtol * abs(value) and doublings < max_doublings:
            v, e, c = piece(rho, 2.0 * rho)
            value, qerr, ch = value + v, qerr + e, max(ch, c)
            rho *= 2.0
            doublings += 1
            tail = bound(rho, ch)
        rho_max = rho
    if tail > 10.0 * abs(value):
        raise TailDominates(f"tail bound {tail:.3g} exceeds 10x |value| = {abs(value):.3g}; "
                            f"increase rho_max (now {rho_max})")
    return MassReading(value, qerr, tail, {"L": L, "rho_max": rho_max, "doublings": doublings,
                                           "a": tuple(np.asarray(a, dtype=float)), "C_h": ch})


def face_mass(model: MetricModel, L: float, sigma: float, a=None,
              rule: Optional[QuadratureRule] = None) -> MassReading:
    """2 * integral of V (H_b - H_g) over Sigma_L = {x_1 = L, rho < sigma}."""
    _require_hyperbolic(model)
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    _check_horo_domain(model, L)
    n = model.n
    m = model if a is None else _oriented(model, a)
    val, err = _integrate(SurfaceSpec.face(n, L, sigma), _mean_curvature_integrand(m, _horo_potential(n)), rule)
    return MassReading(float(val[0]), float(err[0]), 0.0, {"L": L, "sigma": sigma})


# ---------------------------------------------------------- sigma condition

@dataclass(frozen=True)
class SigmaCondition:
    satisfied: bool
    margin: float
    expression: float
    log_factor: bool
    k_universal: float
    k_horosphere: float


def sigma_condition_check(n: int, q: float, k: float) -> SigmaCondition:
    """Whether sigma(L) = e^{kL} kills the top-edge and lateral terms.

    For q < n-1 this needs k(n-2-2q) + (n-1-q) < 0; ``margin`` is the
    slack -(that expression), positive when satisfied.
    """
    if not q > n / 2:
        raise ValidationError(f"falloff q={q} must exceed n/2={n / 2}")
    if not k > 0:
        raise ValidationError("sigma exponent k must be positive")
    expr = k * (n - 2 - 2 * q) + (n - 1 - q)
    if q > n - 1:
        ok = True
    else:
        ok = expr < 0
    return SigmaCondition(bool(ok), float(-expr), float(expr), q == n - 1, (n - 2) / 4.0, n / 2.0)


def predicted_exponents(n: int, q: float, k: float, sharp: bool = True) -> dict:
    """Decay exponents in L of the cylinder pieces for sigma = e^{kL}.

    ``sharp`` evaluates each estimate at its first line, where r on a piece
    is e^{|x_1|} or e^{x_1} sigma^2 / 2, whichever dominates.  Otherwise the
    loosened final forms are returned (bottom edge e^{-(n-2)L/2} sigma^{-2},
    lateral sigma^{-2}), which are valid but not attained.
    """
    top_edge = (n - 1 - q) + k * (n - 2 - 2 * q)
    if sharp:
        bottom_edge = -(n - 1) + k * (n - 2) - q * max(1.0, 2 * k - 1)
        # lateral: e^{x(n-1)} sigma^{n-2} r^{-q} is largest at one of x = +-L
        lateral = max(top_edge, bottom_edge)
    else:
        bottom_edge = -(n - 2) / 2 - 2 * k
        lateral = max(top_edge, -2 * k)
    return {"F-": -(1.0 + q), "E+": top_edge, "E-": bottom_edge, "S_L": lateral}


@dataclass(frozen=True)
class DecayStudy:
    Ls: tuple
    values: dict      # piece -> signed contributions
    envelopes: dict   # piece -> integrals of V |h|_b
    measured: dict    # piece -> fitted exponent of |value|
    envelope_measured: dict
    predicted: dict
    gaps: tuple = ()  # total flux minus the F+ face mass, per L


def _slope(Ls, vals):
    v = np.abs(np.asarray(vals, dtype=float))
    if np.any(v == 0):
        return -math.inf
    return float(np.polyfit(np.asarray(Ls, dtype=float), np.log(v), 1)[0])


def cylinder_decay_study(model: MetricModel, Ls: Sequence[float], k: float,
                         V: Optional[StaticPotential] = None) -> DecayStudy:
    """Fitted decay exponents in L of F-, E+, E-, S_L for sigma = e^{kL}."""
    reps = [cylinder_flux_report(model, L, math.exp(k * L), V) for L in Ls]
    pieces = ("F-", "E+", "E-", "S_L")
    values = {p: tuple(r.contribution(p) for r in reps) for p in pieces}
    env = {p: tuple(r.envelope[p] for r in reps) for p in pieces}
    return DecayStudy(tuple(Ls), values, env,
                      {p: _slope(Ls, values[p]) for p in pieces},
                      {p: _slope(Ls, env[p]) for p in pieces},
                      predicted_exponents(model.n, model.q, k),
                      tuple(r.total - r.faces["F+"].mean_curvature for r in reps))


# ------------------------------------------------------------ cylinder report

@dataclass(frozen=True)
class FaceFlux:
    """Direct flux of U(V) through a face and the pieces of its decomposition."""

    direct: MassReading
    mean_curvature: float
    trace_A: float
    edge_flux: float
    remainder: float
    remainder_scale: float

    @property
    def within_bound(self) -> bool:
        return abs(self.remainder) <= 10.0 * self.remainder_scale + 10.0 * self.direct.quad_error + 1e-14


@dataclass(frozen=True)
class CylinderReport:
    L: float
    sigma: float
    faces: dict
    edges: dict
    total: float
    decomposed_total: float
    envelope: dict = field(default_factory=dict)

    def contribution(self, piece: str) -> float:
        """Signed size of one piece: direct flux for faces, summed edge terms for edges."""
        return self.edges[piece] if piece in self.edges else self.faces[piece].direct.value

    @property
    def consistent(self) -> bool:
        return all(f.within_bound for f in self.faces.values())


def _face_decomposition_integrand(model, V):
    def f(nd: SurfaceNodes):
        jet = model.jet(nd.chart, nd.x)
        v, dV, _ = V.jet(nd.chart, nd.x)
        _, dF, ddF = nd.level.jet(nd.chart, nd.x)
        d = decompose(jet, v, dV, dF, ddF, nd.orientation)
        cd = mean_curvature_difference(jet, dF, ddF, nd.orientation)
        main = -2.0 * v * cd.dH * (1.0 + cd.ratio_m1)
        return np.stack([d.value, main, d.trace_term + d.A_dot_h_term, d.remainder_scale,
                         np.abs(v) * d.h_norm], axis=1)
    return f


def _edge_integrand(model, V, level, orientation, eta):
    """V <X, eta> on edge nodes, with X taken from the face that is a level set of ``level``."""
    def f(nd: SurfaceNodes):
        jet = model.jet(nd.chart, nd.x)
        v, _, _ = V.jet(nd.chart, nd.x)
        _, dF, ddF = level.jet(nd.chart, nd.x)
        frame = surface_frame(jet, dF, ddF, orientation)
        X = tangential_X(jet, frame)
        M = jet.binv @ jet.h
        hn = np.sqrt(np.maximum(np.einsum("...ij,...ji->...", M, M), 0.0))
        return np.stack([v * np.einsum("...j,...j->...", X, eta(nd)), np.abs(v) * hn], axis=1)
    return f


def _eta_radial(nd):
    # b-unit vector along +rho at x_1: e^{-x_1} x_hat / rho
    out = np.zeros_like(nd.x)
    rho = np.linalg.norm(nd.x[:, 1:], axis=1)
    out[:, 1:] = np.exp(-nd.x[:, :1]) * nd.x[:, 1:] / rho[:, None]
    return out


def _eta_axial(sign):
    def eta(nd):
        out = np.zeros_like(nd.x)
        out[:, 0] = sign
        return out
    return eta


def cylinder_flux_report(model: MetricModel, L: float, sigma: float, V: Optional[StaticPotential] = None,
                         rule: Optional[QuadratureRule] = None) -> CylinderReport:
    """Flux of U(V) through the faces F+, F-, S_L of the cylinder C_L, with edge terms.

    V must be a horosphere potential t - a.z (default a = e_1); the model is
    rotated so that a becomes e_1.
    """
    _require_hyperbolic(model)
    n = model.n
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    _check_horo_domain(model, L)
    _check_horo_domain(model, -L)
    if V is None:
        V = _horo_potential(n)
    if not math.isclose(V.c_t, 1.0) or not math.isclose(float(np.linalg.norm(V.a)), 1.0):
        raise ValidationError("cylinder reports need V = t - a.z with |a| = 1")
    m = _oriented(model, V.a)
    Ve = _horo_potential(n)
    integ = _face_decomposition_integrand(m, Ve)
    surfaces = {"F+": SurfaceSpec.face(n, L, sigma, 1),
                "F-": SurfaceSpec.face(n, -L, sigma, -1),
                "S_L": SurfaceSpec.lateral(n, L, sigma)}
    horo_rule = rule or QuadratureRule(RuleKind.HOROSPHERE_POLAR)
    lat_rule = QuadratureRule(RuleKind.INTERVAL, horo_rule.radial_order, horo_rule.angular_order)
    x1f, rhof = coordinate_field(0), hat_radius_field()

    envelope = {}

    def edge(x1, level, orient, eta):
        val, _ = _integrate(SurfaceSpec.edge(n, x1, sigma), _edge_integrand(m, Ve, level, orient, eta), lat_rule)
        envelope["E+" if x1 > 0 else "E-"] = float(val[1])
        return -float(val[0])

    edge_parts = {
        "F+": {"E+": edge(L, x1f, 1, _eta_radial)},
        "F-": {"E-": edge(-L, x1f, -1, _eta_radial)},
        "S_L": {"E+": edge(L, rhof, 1, _eta_axial(1.0)), "E-": edge(-L, rhof, 1, _eta_axial(-1.0))},
    }
    faces = {}
    for name, s in surfaces.items():
        val, err = _integrate(s, integ, lat_rule if name == "S_L" else horo_rule)
        ef = sum(edge_parts[name].values())
        rem = val[0] - val[1] - val[2] - ef
        faces[name] = FaceFlux(MassReading(float(val[0]), float(err[0]), 0.0, {"L": L, "sigma": sigma}),
                               float(val[1]), float(val[2]), float(ef), float(rem), float(val[3]))
        envelope[name] = float(val[4])
    edges = {e: sum(parts.get(e, 0.0) for parts in edge_parts.values()) for e in ("E+", "E-")}
    total = sum(f.direct.value for f in faces.values())
    decomposed = sum(f.mean_curvature + f.trace_A + f.edge_flux for f in faces.values())
    return CylinderReport(L, sigma, faces, edges, total, decomposed, envelope)


# ------------------------------------------------------------------ regions

class RegionKind(enum.Enum):
    FULL = "full"
    EMPTY = "empty"
    HALFSPACE = "halfspace"
    CONE = "cone"
    SLAB = "slab"
    COMPLEMENT = "complement"
    PREDICATE = "predicate"


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """A subset U described in half-space coordinates (y_1, y_hat).

    HALFSPACE: {sign * y_hat[axis] > 0}.  CONE: {|y_hat - apex| < y_1 tan(angle)},
    the cone with apex ``apex`` on the boundary at infinity.  SLAB:
    {lo < y_hat[axis] < hi}.  Axis indices count y_hat components from 0.
    """

    kind: RegionKind
    axis: int = 0
    sign: float = 1.0
    apex: tuple = ()
    angle: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    inner: Optional["RegionSpec"] = None
    predicate: Optional[Callable] = None

    @classmethod
    def full(cls):
        return cls(RegionKind.FULL)

    @classmethod
    def empty(cls):
        return cls(RegionKind.EMPTY)

    @classmethod
    def halfspace(cls, axis=0, sign=1.0):
        return cls(RegionKind.HALFSPACE, axis=axis, sign=sign)

    @classmethod
    def cone(cls, apex, angle):
        if not 0 < angle < math.pi / 2:
            raise ValidationError("cone half-angle must lie in (0, pi/2)")
        return cls(RegionKind.CONE, apex=tuple(map(float, apex)), angle=float(angle))

    @classmethod
    def slab(cls, axis, lo, hi):
        return cls(RegionKind.SLAB, axis=axis, lo=lo, hi=hi)

    @classmethod
    def complement(cls, inner):
        return cls(RegionKind.COMPLEMENT, inner=inner)

    @classmethod
    def from_predicate(cls, func):
        return cls(RegionKind.PREDICATE, predicate=func)

    def contains(self, y1, yhat):
        y1 = np.asarray(y1, dtype=float)
        yhat = np.asarray(yhat, dtype=float)
        k = self.kind
        if k is RegionKind.FULL:
            return np.ones(y1.shape, dtype=bool)
        if k is RegionKind.EMPTY:
            return np.zeros(y1.shape, dtype=bool)
        if k is RegionKind.HALFSPACE:
            return self.sign * yhat[..., self.axis] > 0
        if k is RegionKind.CONE:
            d = np.linalg.norm(yhat - np.asarray(self.apex), axis=-1)
            return d < y1 * math.tan(self.angle)
        if k is RegionKind.SLAB:
            c = yhat[..., self.axis]
            return (c > self.lo) & (c < self.hi)
        if k is RegionKind.COMPLEMENT:
            return ~self.inner.contains(y1, yhat)
        return np.asarray(self.predicate(y1, yhat), dtype=bool)

    def footprint_disk(self, L, sigma):
        """(center, radius) if U meets Sigma_L in a disk lying inside it, else None."""
        if self.kind is not RegionKind.CONE:
            return None
        R = math.exp(-L) * math.tan(self.angle)
        c = np.asarray(self.apex)
        if np.linalg.norm(c) + R >= sigma:
            return None
        return c, R


SigmaLike = Union[float, Callable[[float], float]]


def _sigma_at(sigma: SigmaLike, L: float) -> float:
    return float(sigma(L)) if callable(sigma) else float(sigma)


def _region_mask(region: RegionSpec):
    def mask(nd: SurfaceNodes):
        y1 = np.exp(-nd.x[:, 0])
        return region.contains(y1, nd.x[:, 1:]).astype(float)
    return mask


def theta(region: RegionSpec, L: float, sigma: SigmaLike, n: int = 3,
          rule: Optional[QuadratureRule] = None, adapted: bool = True) -> float:
    """Theta(U, L) = e^{-L(n-1)} |U cap Sigma_L|_b.

    Cones use a quadrature rule fitted to their footprint disk when
    ``adapted``; everything else counts face nodes inside the region.
    """
    s = _sigma_at(sigma, L)
    rule = rule or QuadratureRule(RuleKind.HOROSPHERE_POLAR)
    scale = math.exp(-L * (n - 1))
    if region.kind is RegionKind.EMPTY:
        return 0.0
    if region.kind is RegionKind.FULL:
        return scale * SurfaceSpec.face(n, L, s).b_area()
    disk = region.footprint_disk(L, s) if adapted else None
    if disk is not None:
        return scale * SurfaceSpec.disk(n, L, disk[0], disk[1]).b_area()
    nodes = SurfaceSpec.face(n, L, s).nodes(rule)
    return scale * pairwise_sum(nodes.weights * _region_mask(region)(nodes))


def theta_decay_exponent(region: RegionSpec, Ls: Sequence[float], sigma: SigmaLike, n: int = 3) -> float:
    """Fitted slope of ln Theta(U, L) against L (-inf when Theta vanishes)."""
    th = np.array([theta(region, L, sigma, n) for L in Ls])
    if np.all(th == 0):
        return -math.inf
    if np.any(th <= 0):
        return math.nan
    return float(np.polyfit(np.asarray(Ls, dtype=float), np.log(th), 1)[0])


def excluded_region_mass(model: MetricModel, region: RegionSpec, L: float, sigma: SigmaLike,
                         rule: Optional[QuadratureRule] = None, check_decay: bool = True) -> MassReading:
    """2 * integral of V (H_b - H_g) over Sigma_L minus U."""
    _require_hyperbolic(model)
    _check_horo_domain(model, L)
    n = model.n
    s = _sigma_at(sigma, L)
    rule = rule or QuadratureRule(RuleKind.HOROSPHERE_POLAR)
    decay = None
    if check_decay and region.kind not in (RegionKind.EMPTY, RegionKind.FULL):
        decay = theta_decay_exponent(region, [L, L + 1.0, L + 2.0], sigma, n)
        if not decay < model.q - n - 1e-6:
            warnings.warn(f"Theta(U, L) decay exponent {decay:.3g} is not below q-n = {model.q - n:.3g}; "
                          "the region may carry mass", RuntimeWarning, stacklevel=2)
    V = _horo_potential(n)
    face = SurfaceSpec.face(n, L, s)
    disk = region.footprint_disk(L, s)
    if disk is not None:
        full_val, full_err = _integrate(face, _mean_curvature_integrand(model, V), rule)
        in_val, in_err = _integrate(SurfaceSpec.disk(n, L, *disk), _mean_curvature_integrand(model, V), rule)
        value, err = full_val[0] - in_val[0], full_err[0] + in_err[0]
    else:
        keep = _region_mask(RegionSpec.complement(region))
        val, e = _integrate(face, _mean_curvature_integrand(model, V, keep), rule)
        value, err = val[0], e[0]
    return MassReading(float(value), float(err), 0.0, {"L": L, "sigma": s, "theta_decay": decay})


# ------------------------------------------------------------- ADM formulas

def _af_checks(model, r):
    _require_euclidean(model)
    if r <= model.r_min:
        raise DomainError(f"sphere radius {r} must exceed {model.r_min:.4g}")


def adm_flux(model: MetricModel, r: float, rule: Optional[QuadratureRule] = None) -> float:
    """(1 / (2(n-1) omega_{n-1})) * integral of (g_ij,j - g_jj,i) nu^i over S_r."""
    _af_checks(model, r)
    n = model.n

    def f(nd):
        jet = model.jet(nd.chart, nd.x)
        dh = jet.dh
        div = np.einsum("...jij->...i", dh)
        dtr = np.einsum("...ijj->...i", dh)
        nu = nd.x / np.linalg.norm(nd.x, axis=1)[:, None]
        return np.einsum("...i,...i->...", div - dtr, nu)

    val, _ = _integrate(SurfaceSpec.sphere_af(n, r), f, rule)
    return float(val[0]) / (2.0 * (n - 1) * sphere_area(n - 1))


def adm_geometric(model: MetricModel, r: float, rule: Optional[QuadratureRule] = None) -> float:
    """Mean-curvature and area-deficit form of the ADM mass on S_r."""
    _af_checks(model, r)
    n = model.n

    def f(nd):
        jet = model.jet(nd.chart, nd.x)
        _, dF, ddF = nd.level.jet(nd.chart, nd.x)
        cd = mean_curvature_difference(jet, dF, ddF, 1)
        return -cd.dH * (1.0 + cd.ratio_m1) - cd.ratio_m1 / r

    val, _ = _integrate(SurfaceSpec.sphere_af(n, r), f, rule)
    return float(val[0]) / ((n - 1) * sphere_area(n - 1))


def extrapolate_readings(param_name: str, params: Sequence[float], readings: Sequence[MassReading],
                         log_param: bool = False, atol: float = 0.0) -> Fit:
    """Extrapolate a sweep; truncation tails are systematic, so they widen the
    final uncertainty instead of the noise floor used to detect convergence."""
    series = ConvergenceSeries(param_name, tuple(float(p) for p in params),
                               tuple(r.value for r in readings),
                               tuple(r.quad_error for r in readings), log_param)
    fit = extrapolate(series, atol=atol)
    return replace(fit, uncertainty=fit.uncertainty + readings[-1].tail_bound)


def remainder_integral(model: MetricModel, L: float, sigma: float,
                       rule: Optional[QuadratureRule] = None) -> tuple:
    """(integral of |R|, integral of R) over the face Sigma_L, where R is the
    pointwise remainder of the mean-curvature decomposition of U(e^{x_1})."""
    _require_hyperbolic(model)
    _check_horo_domain(model, L)
    n = model.n
    V = _horo_potential(n)

    def f(nd):
        jet = model.jet(nd.chart, nd.x)
        v, dV, _ = V.jet(nd.chart, nd.x)
        _, dF, ddF = nd.level.jet(nd.chart, nd.x)
        rem = decompose(jet, v, dV, dF, ddF, nd.orientation).remainder
        return np.stack([np.abs(rem), rem], axis=1)

    val, _ = _integrate(SurfaceSpec.face(n, L, sigma), f, rule)
    return float(val[0]), float(val[1])

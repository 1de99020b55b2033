"""Metric models g = b + h on hyperbolic or Euclidean backgrounds.

Perturbations are evaluated in the native chart (hyperboloidal z for
hyperbolic backgrounds, Cartesian x for the Euclidean one) and pulled back to
other charts through the exact chart jets.  Derivative arrays use the index
order ``d[..., k, i, j] = d_k T_ij``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

from . import charts
from .charts import ChartId
from .errors import DomainError, ValidationError

FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-4


class Background(enum.Enum):
    HYPERBOLIC = "hyperbolic"
    EUCLIDEAN = "euclidean"


# ---------------------------------------------------------------- scalar jets

def _radial_jet(z, f, df, d2f):
    """(G, dG, ddG) of G(z) = f(r) given f and its r-derivatives at r = |z|."""
    r = np.sqrt(np.sum(z * z, axis=-1))
    n = z.shape[-1]
    e = z / r[..., None]
    G = f
    dG = df[..., None] * e
    ddG = (d2f[..., None, None] * e[..., :, None] * e[..., None, :]
           + (df / r)[..., None, None] * (np.eye(n) - e[..., :, None] * e[..., None, :]))
    return G, dG, ddG


def _product_jet(a, b):
    A, dA, ddA = a
    B, dB, ddB = b
    G = A * B
    dG = dA * B[..., None] + A[..., None] * dB
    ddG = (ddA * B[..., None, None] + A[..., None, None] * ddB
           + dA[..., :, None] * dB[..., None, :] + dB[..., :, None] * dA[..., None, :])
    return G, dG, ddG


def _zz_tensor(z, G, dG, ddG, order=2):
    """h = G z z^T with first and second coordinate derivatives."""
    n = z.shape[-1]
    eye = np.eye(n)
    zz = z[..., :, None] * z[..., None, :]
    h = G[..., None, None] * zz
    # d_k (z_i z_j) = delta_ki z_j + z_i delta_kj
    dzz = eye[:, :, None] * z[..., None, None, :] + z[..., None, :, None] * eye[:, None, :]
    dh = dG[..., :, None, None] * zz[..., None, :, :] + G[..., None, None, None] * dzz
    if order < 2:
        return h, dh, None
    # d_l d_k (z_i z_j) = delta_ki delta_lj + delta_li delta_kj
    ddzz = eye[None, :, :, None] * eye[:, None, None, :] + eye[:, None, :, None] * eye[None, :, None, :]
    ddh = (ddG[..., :, :, None, None] * zz[..., None, None, :, :]
           + dG[..., :, None, None, None] * dzz[..., None, :, :, :]
           + dG[..., None, :, None, None] * dzz[..., :, None, :, :]
           + G[..., None, None, None, None] * ddzz)
    return h, dh, ddh


# ------------------------------------------------------------- perturbations

class Perturbation:
    """h in the native chart; subclasses implement ``evaluate``."""

    analytic = True

    def evaluate(self, z, order=1):
        """Return (h, dh, ddh) at points z of shape (N, n); ddh may be None when order < 2."""
        raise NotImplementedError

    def support_radius(self):
        return 0.0


class ZeroPerturbation(Perturbation):
    def evaluate(self, z, order=1):
        N, n = z.shape
        return (np.zeros((N, n, n)), np.zeros((N, n, n, n)),
                np.zeros((N, n, n, n, n)) if order >= 2 else None)


@dataclass(frozen=True)
class AdSPerturbation(Perturbation):
    """h = Phi(r) z z^T with Phi = 2m r^{-n} / ((1+r^2)(1+r^2-2m r^{2-n}))."""

    n: int
    m: float

    def evaluate(self, z, order=1):
        n, m = self.n, self.m
        r = np.sqrt(np.sum(z * z, axis=-1))
        A = 1.0 + r * r
        B = A - 2.0 * m * r ** (2 - n)
        dA = 2.0 * r
        dB = 2.0 * r - 2.0 * m * (2 - n) * r ** (1 - n)
        d2A = 2.0
        d2B = 2.0 - 2.0 * m * (2 - n) * (1 - n) * r ** (-n)
        phi = 2.0 * m * r ** (-n) / (A * B)
        lp = -n / r - dA / A - dB / B
        dlp = n / r**2 - (d2A * A - dA**2) / A**2 - (d2B * B - dB**2) / B**2
        dphi = phi * lp
        d2phi = phi * (lp * lp + dlp)
        return _zz_tensor(z, *_radial_jet(z, phi, dphi, d2phi), order=order)


def _bump_profile(c, width):
    """chi(c) = exp(-s^2/(1-s^2)), s = (1-c)/width, with c-derivatives; zero for |s| >= 1."""
    s = (1.0 - c) / width
    inside = np.abs(s) < 1.0
    si = np.where(inside, s, 0.0)
    d = 1.0 - si * si
    E = -si * si / d
    chi = np.where(inside, np.exp(E), 0.0)
    Ep = -2.0 * si / d**2
    Epp = -2.0 / d**2 - 8.0 * si * si / d**3
    dchi = np.where(inside, -Ep * chi / width, 0.0)
    d2chi = np.where(inside, (Epp + Ep * Ep) * chi / width**2, 0.0)
    return chi, dchi, d2chi


@dataclass(frozen=True)
class AngularBumpPerturbation(Perturbation):
    """h = F dr (x) dr with F = A chi(a.z/r) (1+r^2)^{-q/2-1}, so |h|_b = A chi (1+r^2)^{-q/2}."""

    n: int
    amplitude: float
    q: float
    axis: tuple
    width: float = 1.0

    def evaluate(self, z, order=1):
        a = np.asarray(self.axis, dtype=float)
        r = np.sqrt(np.sum(z * z, axis=-1))
        n = z.shape[-1]
        c = (z @ a) / r
        dc = a / r[..., None] - c[..., None] * z / (r * r)[..., None]
        ddc = (-(a[:, None] * z[..., None, :] + z[..., :, None] * a[None, :]) / (r**3)[..., None, None]
               - (c / r**2)[..., None, None] * np.eye(n)
               + (3.0 * c / r**4)[..., None, None] * z[..., :, None] * z[..., None, :])
        chi, dchi, d2chi = _bump_profile(c, self.width)
        ang = (self.amplitude * chi,
               self.amplitude * dchi[..., None] * dc,
               self.amplitude * (d2chi[..., None, None] * dc[..., :, None] * dc[..., None, :]
                                 + dchi[..., None, None] * ddc))
        # radial factor R(r) = (1+r^2)^{-q/2-1} r^{-2}
        p = -self.q / 2.0 - 1.0
        A = 1.0 + r * r
        R = A**p / (r * r)
        lr = 2.0 * p * r / A - 2.0 / r
        dlr = 2.0 * p * (A - 2.0 * r * r) / A**2 + 2.0 / r**2
        rad = _radial_jet(z, R, R * lr, R * (lr * lr + dlr))
        return _zz_tensor(z, *_product_jet(ang, rad), order=order)


@dataclass(frozen=True)
class ConformalPerturbation(Perturbation):
    """Euclidean background: h = (psi^4 - 1) delta with psi = 1 + m/(2r)."""

    m: float

    def evaluate(self, x, order=1):
        n = x.shape[-1]
        r = np.sqrt(np.sum(x * x, axis=-1))
        psi = 1.0 + self.m / (2.0 * r)
        dpsi = -self.m / (2.0 * r * r)
        d2psi = self.m / r**3
        f = psi**4 - 1.0
        df = 4.0 * psi**3 * dpsi
        d2f = 12.0 * psi**2 * dpsi**2 + 4.0 * psi**3 * d2psi
        F, dF, ddF = _radial_jet(x, f, df, d2f)
        eye = np.eye(n)
        h = F[..., None, None] * eye
        dh = dF[..., :, None, None] * eye
        ddh = ddF[..., :, :, None, None] * eye if order >= 2 else None
        return h, dh, ddh


@dataclass(frozen=True)
class ScaledPerturbation(Perturbation):
    base: Perturbation
    factor: float

    @property
    def analytic(self):
        return self.base.analytic

    def evaluate(self, z, order=1):
        h, dh, ddh = self.base.evaluate(z, order)
        lam = self.factor
        return lam * h, lam * dh, (lam * ddh if ddh is not None else None)


@dataclass(frozen=True, eq=False)
class RotatedPerturbation(Perturbation):
    """h'(z') = R h(R^T z') R^T: the base perturbation carried along the isometry z -> R z."""

    base: Perturbation
    R: np.ndarray

    @property
    def analytic(self):
        return self.base.analytic

    def evaluate(self, z, order=1):
        R = self.R
        h, dh, ddh = self.base.evaluate(z @ R, order)
        h2 = np.einsum("ia,jb,...ab->...ij", R, R, h)
        dh2 = np.einsum("kc,ia,jb,...cab->...kij", R, R, R, dh)
        ddh2 = None
        if ddh is not None:
            ddh2 = np.einsum("ld,kc,ia,jb,...dcab->...lkij", R, R, R, R, ddh)
        return h2, dh2, ddh2


@dataclass(frozen=True, eq=False)
class CallablePerturbation(Perturbation):
    """User-supplied h(z) -> (N, n, n); derivatives by central differences."""

    func: Callable
    analytic = False

    def _h(self, z):
        h = np.asarray(self.func(z), dtype=float)
        return 0.5 * (h + np.swapaxes(h, -1, -2))

    def evaluate(self, z, order=1):
        h = self._h(z)
        dh = _central_diff(self._h, z, FD_STEP_FIRST)
        ddh = None
        if order >= 2:
            ddh = _central_diff(lambda p: _central_diff(self._h, p, FD_STEP_FIRST), z, FD_STEP_SECOND)
        return h, dh, ddh


def fd_scale(chart: Optional[ChartId], x):
    """Per-coordinate length scale for finite-difference steps.

    In the half-space chart the natural unit is y_1 in every direction, and
    horospherical x_hat directions shrink like e^{-x_1}; elsewhere use max(1, |x_k|).
    """
    x = np.asarray(x, dtype=float)
    if chart is ChartId.HALFSPACE:
        return np.broadcast_to(x[..., :1], x.shape)
    if chart is ChartId.HOROSPHERICAL:
        out = np.empty_like(x)
        out[..., 0] = 1.0
        out[..., 1:] = np.minimum(1.0, np.exp(-x[..., :1])) * np.maximum(1.0, np.abs(x[..., 1:]))
        return out
    return np.maximum(1.0, np.abs(x))


def _central_diff(f, x, rel, chart: Optional[ChartId] = None):
    """Stack of central differences d_k f along each coordinate, axis inserted after the batch axis."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    scale = fd_scale(chart, x)
    out = []
    for k in range(n):
        step = rel * scale[..., k]
        e = np.zeros_like(x)
        e[..., k] = step
        fp, fm = f(x + e), f(x - e)
        out.append((fp - fm) / (2.0 * step.reshape(step.shape + (1,) * (fp.ndim - step.ndim))))
    return np.stack(out, axis=1)


_EXPR_NAMESPACE = {name: getattr(np, name) for name in
                   ("sqrt", "exp", "log", "sin", "cos", "tan", "tanh", "cosh", "sinh",
                    "arctan", "abs", "where", "pi", "maximum", "minimum")}


def expression_perturbation(n: int, components: Mapping[str, str]) -> CallablePerturbation:
    """h from numpy expressions in r, t, z1..zn keyed by component names like "h11", "h12"."""
    parsed = {}
    for key, src in components.items():
        if len(key) != 3 or key[0] != "h" or not key[1:].isdigit():
            raise ValidationError(f"bad component name {key!r}; expected h<i><j>")
        i, j = int(key[1]) - 1, int(key[2]) - 1
        if not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"component {key!r} out of range for n={n}")
        parsed[(min(i, j), max(i, j))] = compile(src, key, "eval")

    def func(z):
        env = dict(_EXPR_NAMESPACE)
        r = np.sqrt(np.sum(z * z, axis=-1))
        env.update(r=r, t=np.sqrt(1.0 + r * r))
        for i in range(n):
            env[f"z{i + 1}"] = z[..., i]
        h = np.zeros(z.shape + (n,))
        for (i, j), code in parsed.items():
            val = np.broadcast_to(eval(code, {"__builtins__": {}}, env), r.shape)
            h[..., i, j] = val
            h[..., j, i] = val
        return h

    return CallablePerturbation(func)


# ------------------------------------------------------------ background b

def background_jet(background: Background, chart: ChartId, x):
    """(b, db, binv) in the given chart, all analytic."""
    N, n = x.shape
    eye = np.eye(n)
    if background is Background.EUCLIDEAN:
        if chart is not ChartId.CARTESIAN:
            raise ValidationError("Euclidean background lives in the Cartesian chart")
        return (np.broadcast_to(eye, (N, n, n)).copy(), np.zeros((N, n, n, n)),
                np.broadcast_to(eye, (N, n, n)).copy())
    if chart is ChartId.HYPERBOLOIDAL:
        s = 1.0 / (1.0 + np.sum(x * x, axis=-1))
        zz = x[:, :, None] * x[:, None, :]
        b = eye - s[:, None, None] * zz
        binv = eye + zz
        dzz = eye[:, :, None] * x[:, None, None, :] + x[:, None, :, None] * eye[:, None, :]
        db = (2.0 * s * s)[:, None, None, None] * x[:, :, None, None] * zz[:, None, :, :] \
            - s[:, None, None, None] * dzz
        return b, db, binv
    if chart is ChartId.HOROSPHERICAL:
        e2 = np.exp(2.0 * x[:, 0])
        diag = np.ones((N, n))
        diag[:, 1:] = e2[:, None]
        b = diag[:, :, None] * eye
        binv = (1.0 / diag)[:, :, None] * eye
        db = np.zeros((N, n, n, n))
        db[:, 0] = 2.0 * (b - eye * (eye[0][:, None] * eye[0][None, :]))
        return b, db, binv
    if chart is ChartId.HALFSPACE:
        y1 = x[:, 0]
        b = (y1**-2)[:, None, None] * eye
        binv = (y1**2)[:, None, None] * eye
        db = np.zeros((N, n, n, n))
        db[:, 0] = (-2.0 * y1**-3)[:, None, None] * eye
        return b, db, binv
    raise ValidationError(f"hyperbolic background is not defined in chart {chart}")


# ----------------------------------------------------------------- the model

def _sym(T):
    # einsum pullbacks are symmetric only up to rounding; make it exact
    return 0.5 * (T + np.swapaxes(T, -1, -2))


@dataclass(frozen=True)
class Jet:
    """Metric data at a batch of points in one chart."""

    chart: ChartId
    x: np.ndarray
    b: np.ndarray
    db: np.ndarray
    binv: np.ndarray
    h: np.ndarray
    dh: np.ndarray

    @property
    def g(self):
        return self.b + self.h

    @property
    def dg(self):
        return self.db + self.dh


@dataclass(frozen=True, eq=False)
class MetricModel:
    n: int
    background: Background
    q: float
    native_chart: ChartId
    perturbation: Perturbation = field(default_factory=ZeroPerturbation)
    r_min: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict)
    fd: bool = False  # force the finite-difference derivative path

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("dimension n must be at least 3")
        bound = self.n / 2 if self.background is Background.HYPERBOLIC else (self.n - 2) / 2
        if not self.is_exact_background and self.q <= bound:
            raise ValidationError(f"falloff q={self.q} must exceed {bound}")

    @property
    def is_exact_background(self) -> bool:
        return isinstance(self.perturbation, ZeroPerturbation)

    @property
    def analytic_derivatives(self) -> bool:
        return self.perturbation.analytic and not self.fd

    def with_fd(self) -> "MetricModel":
        return replace(self, fd=True)

    def scaled(self, factor: float) -> "MetricModel":
        return replace(self, perturbation=ScaledPerturbation(self.perturbation, factor),
                       params={**self.params, "scale": factor})

    def rotated(self, R) -> "MetricModel":
        """Pushforward of g under the hyperbolic isometry z -> R z (R orthogonal)."""
        R = np.asarray(R, dtype=float)
        if not np.allclose(R @ R.T, np.eye(self.n), atol=1e-12):
            raise ValidationError("rotation must be orthogonal")
        if self.is_exact_background:
            return self
        return replace(self, perturbation=RotatedPerturbation(self.perturbation, R))

    # -- evaluation

    def check_domain(self, chart: ChartId, x):
        if self.r_min <= 0:
            return
        r = charts.radius(charts.Point(chart, x))
        bad = r < self.r_min
        if self.background is Background.EUCLIDEAN:
            bad = r <= self.r_min
        if np.any(bad):
            raise DomainError(f"{self.name}: point at r={float(np.min(r)):.6g} is inside r_min={self.r_min:.6g}")

    def perturbation_native(self, x, order=1):
        return self.perturbation.evaluate(np.asarray(x, dtype=float), order)

    def perturbation_in(self, chart: ChartId, x):
        """(h, dh) pulled back to ``chart``."""
        x = np.asarray(x, dtype=float)
        if self.is_exact_background:
            N, n = x.shape
            return np.zeros((N, n, n)), np.zeros((N, n, n, n))
        if chart is self.native_chart:
            h, dh, _ = self.perturbation_native(x, 1)
            return h, dh
        if self.background is Background.EUCLIDEAN:
            raise ValidationError("Euclidean models are only defined in the Cartesian chart")
        z, J, K = charts.hyperboloidal_jet(chart, x)
        hz, dhz, _ = self.perturbation_native(z, 1)
        h = np.einsum("...ia,...ij,...jb->...ab", J, hz, J)
        dh = (np.einsum("...iac,...ij,...jb->...cab", K, hz, J)
              + np.einsum("...ia,...ij,...jbc->...cab", J, hz, K)
              + np.einsum("...ia,...jb,...kc,...kij->...cab", J, J, J, dhz))
        return _sym(h), _sym(dh)

    def _h_only(self, chart, x):
        if self.is_exact_background:
            N, n = x.shape
            return np.zeros((N, n, n))
        if chart is self.native_chart:
            return self.perturbation.evaluate(x, 0)[0]
        z, J, _ = charts.hyperboloidal_jet(chart, x)
        hz = self.perturbation.evaluate(z, 0)[0]
        return _sym(np.einsum("...ia,...ij,...jb->...ab", J, hz, J))

    def jet(self, chart: ChartId, x) -> Jet:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.n:
            raise ValidationError(f"expected {self.n} coordinates, got {x.shape[-1]}")
        self.check_domain(chart, x)
        b, db, binv = background_jet(self.background, chart, x)
        if self.fd:
            db = _central_diff(lambda p: background_jet(self.background, chart, p)[0], x, FD_STEP_FIRST, chart)
            h = self._h_only(chart, x)
            dh = _central_diff(lambda p: self._h_only(chart, p), x, FD_STEP_FIRST, chart)
        else:
            h, dh = self.perturbation_in(chart, x)
        return Jet(chart, x, b, db, binv, h, dh)

    def metric(self, chart: ChartId, x):
        j = self.jet(chart, x)
        return j.g


def _require_hyperbolic_n(n):
    if int(n) != n or n < 3:
        raise ValidationError("n must be an integer >= 3")


def hyperbolic_background(n: int, chart: ChartId = ChartId.HYPERBOLOIDAL) -> MetricModel:
    """Exact hyperbolic space; ``chart`` only records the preferred evaluation chart."""
    _require_hyperbolic_n(n)
    return MetricModel(n=n, background=Background.HYPERBOLIC, q=float("inf"),
                       native_chart=ChartId.HYPERBOLOIDAL, name="hyperbolic",
                       params={"chart": chart.value})


def euclidean_background(n: int = 3) -> MetricModel:
    return MetricModel(n=n, background=Background.EUCLIDEAN, q=float("inf"),
                       native_chart=ChartId.CARTESIAN, name="flat")


def ads_horizon_radius(n: int, m: float) -> float:
    """Largest zero r_m of r^n + r^{n-2} - 2m by bisection."""
    f = lambda r: r**n + r ** (n - 2) - 2.0 * m
    base = (2.0 * m) ** (1.0 / n)
    lo, hi = max(1e-300, base / 2.0), max(2.0, 2.0 * base)
    while f(lo) > 0:
        lo /= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def ads_schwarzschild(n: int, m: float) -> MetricModel:
    _require_hyperbolic_n(n)
    if not m > 0:
        raise ValidationError("mass parameter m must be positive")
    rm = ads_horizon_radius(n, m)
    return MetricModel(n=n, background=Background.HYPERBOLIC, q=float(n),
                       native_chart=ChartId.HYPERBOLOIDAL,
                       perturbation=AdSPerturbation(n, float(m)), r_min=1.01 * rm,
                       name="ads", params={"m": float(m), "r_m": rm})


def schwarzschild_af(m: float) -> MetricModel:
    if not m > 0:
        raise ValidationError("mass parameter m must be positive")
    return MetricModel(n=3, background=Background.EUCLIDEAN, q=1.0,
                       native_chart=ChartId.CARTESIAN, perturbation=ConformalPerturbation(float(m)),
                       r_min=m / 2.0, name="schwarzschild", params={"m": float(m)})


@dataclass(frozen=True)
class PerturbationSpec:
    """Named perturbation family plus parameters.

    Families: ``zero``; ``angular_bump`` (amplitude, q, axis, width, r_min);
    ``scaled_ads`` (m, scale); ``expression`` (components {"h11": "..."} in
    r, t, z1..zn, with q and r_min); ``callable`` (func, q, r_min).
    """

    family: str
    n: int = 3
    q: float | None = None
    params: Mapping = field(default_factory=dict)


def _probe_points(n, r_lo, r_hi=1e3, count=12, directions=48, seed=0):
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(directions, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = np.vstack([dirs, np.eye(n), -np.eye(n)])
    radii = np.geomspace(max(r_lo, 1e-3), max(r_hi, 2 * r_lo), count)
    return (radii[:, None, None] * dirs[None]).reshape(-1, n)


def _probe_positive_definite(model: MetricModel):
    if model.is_exact_background:
        return
    pts = _probe_points(model.n, max(model.r_min, 0.05) * 1.0001)
    h = model._h_only(model.native_chart, pts)
    b, _, binv = background_jet(model.background, model.native_chart, pts)
    if not np.all(np.isfinite(h)):
        raise ValidationError("perturbation is not finite on the probe grid")
    M = binv @ h
    lam = np.linalg.eigvals(np.eye(model.n) + M).real
    if np.any(lam <= 0):
        raise ValidationError("g = b + h is not positive definite on the probe grid")


def custom_perturbation(spec: PerturbationSpec) -> MetricModel:
    n = spec.n
    _require_hyperbolic_n(n)
    p = dict(spec.params)
    fam = spec.family
    if fam == "zero":
        model = hyperbolic_background(n)
    elif fam == "scaled_ads":
        base = ads_schwarzschild(n, float(p.get("m", 1.0)))
        lam = float(p.get("scale", 1.0))
        model = replace(base, perturbation=ScaledPerturbation(base.perturbation, lam),
                        name="scaled_ads", params={**base.params, "scale": lam})
    elif fam == "angular_bump":
        q = float(spec.q if spec.q is not None else p.get("q", n))
        axis = np.asarray(p.get("axis", np.eye(n)[0]), dtype=float)
        if axis.shape != (n,) or not np.isclose(np.linalg.norm(axis), 1.0):
            raise ValidationError("bump axis must be a unit n-vector")
        pert = AngularBumpPerturbation(n, float(p.get("amplitude", 0.1)), q,
                                       tuple(axis), float(p.get("width", 1.0)))
        model = MetricModel(n=n, background=Background.HYPERBOLIC, q=q,
                            native_chart=ChartId.HYPERBOLOIDAL, perturbation=pert,
                            r_min=float(p.get("r_min", 1.0)), name="angular_bump",
                            params={"amplitude": pert.amplitude, "q": q, "width": pert.width,
                                    "axis": tuple(axis)})
    elif fam in ("expression", "callable"):
        if spec.q is None:
            raise ValidationError("custom perturbations must declare their falloff q")
        if fam == "expression":
            pert = expression_perturbation(n, p["components"])
        else:
            pert = CallablePerturbation(p["func"])
        model = MetricModel(n=n, background=Background.HYPERBOLIC, q=float(spec.q),
                            native_chart=ChartId.HYPERBOLOIDAL, perturbation=pert,
                            r_min=float(p.get("r_min", 1.0)), name=fam, params={})
    else:
        raise ValidationError(f"unknown perturbation family {fam!r}")
    _probe_positive_definite(model)
    return model


def angular_bump(n=3, amplitude=0.1, q=3.0, axis=None, width=1.0, r_min=1.0) -> MetricModel:
    axis = np.eye(n)[0] if axis is None else axis
    return custom_perturbation(PerturbationSpec("angular_bump", n, q, {
        "amplitude": amplitude, "axis": axis, "width": width, "r_min": r_min}))


# ------------------------------------------------------------- diagnostics

def tensor_norms_b(jet: Jet):
    """|h|_b and |grad-ring h|_b at each point of a jet."""
    from .geomkernel import background_covariant_dh

    binv = jet.binv
    h = jet.h
    hn2 = np.einsum("...ik,...jl,...ij,...kl->...", binv, binv, h, h)
    nh = background_covariant_dh(jet)
    dn2 = np.einsum("...ka,...ib,...jc,...kij,...abc->...", binv, binv, binv, nh, nh)
    return np.sqrt(np.maximum(hn2, 0)), np.sqrt(np.maximum(dn2, 0))


@dataclass(frozen=True)
class DecayReport:
    exact: bool
    exponent: float
    exponent_derivative: float
    declared_q: float
    flagged: bool
    radii: np.ndarray
    norms: np.ndarray


def decay_check(model: MetricModel, samples: int = 24) -> DecayReport:
    """Fit the decay exponent of sup |h|_b along geometrically spaced radii."""
    if model.background is not Background.HYPERBOLIC:
        raise ValidationError("decay_check is defined for hyperbolic-background models")
    n = model.n
    r_lo = max(10.0, 10.0 * model.r_min)
    radii = np.geomspace(r_lo, 1e4, samples)
    rng = np.random.default_rng(1)
    dirs = rng.normal(size=(64, n))
    dirs = np.vstack([dirs / np.linalg.norm(dirs, axis=1, keepdims=True), np.eye(n), -np.eye(n)])
    hn = np.empty(samples)
    dn = np.empty(samples)
    for i, r in enumerate(radii):
        j = model.jet(ChartId.HYPERBOLOIDAL, r * dirs)
        a, b = tensor_norms_b(j)
        hn[i], dn[i] = a.max(), b.max()
    if np.all(hn == 0) and np.all(dn == 0):
        return DecayReport(True, float("inf"), float("inf"), model.q, False, radii, hn)
    lr = np.log(radii)
    slope_h = -np.polyfit(lr[-samples // 2:], np.log(hn[-samples // 2:]), 1)[0]
    slope_d = -np.polyfit(lr[-samples // 2:], np.log(dn[-samples // 2:]), 1)[0]
    flagged = min(slope_h, slope_d) < model.q - 0.25
    return DecayReport(False, float(slope_h), float(slope_d), model.q, bool(flagged), radii, hn)

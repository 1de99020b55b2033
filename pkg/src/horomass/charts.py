"""Coordinate charts on hyperbolic space and exact transforms between them.

Three charts are supported:

* ``HYPERBOLOIDAL``: (z_1, ..., z_n) on the upper sheet t^2 - |z|^2 = 1.
* ``HALFSPACE``: (y_1, ..., y_n) with y_1 > 0 and b = y_1^{-2} |dy|^2.
* ``HOROSPHERICAL``: (x_1, ..., x_n) with x_1 = -ln y_1, x_i = y_i, so that
  b = dx_1^2 + e^{2 x_1} |dx_hat|^2.

``CARTESIAN`` is the flat chart used by Euclidean-background models; it does
not participate in transforms.

All functions accept coordinate arrays of shape (..., n) and broadcast over
the leading axes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, ValidationError


class ChartId(enum.Enum):
    HYPERBOLOIDAL = "hyperboloidal"
    HALFSPACE = "halfspace"
    HOROSPHERICAL = "horospherical"
    CARTESIAN = "cartesian"


_HYPERBOLIC_CHARTS = (ChartId.HYPERBOLOIDAL, ChartId.HALFSPACE, ChartId.HOROSPHERICAL)


@dataclass(frozen=True, eq=False)
class Point:
    """One point (coords shape (n,)) or a batch of points (shape (N, n)) in a chart."""

    chart: ChartId
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", c)
        if c.ndim == 0 or c.shape[-1] < 1:
            raise ValidationError("coords must have a trailing dimension n")
        if not np.all(np.isfinite(c)):
            raise ValidationError("coordinates must be finite")
        if self.chart is ChartId.HALFSPACE and np.any(c[..., 0] <= 0):
            raise ValidationError("half-space chart requires y_1 > 0")

    @property
    def n(self) -> int:
        return self.coords.shape[-1]

    def __eq__(self, other):
        return (isinstance(other, Point) and other.chart is self.chart
                and np.array_equal(other.coords, self.coords))


def hyperboloid_t(z):
    """t = sqrt(1 + |z|^2)."""
    z = np.asarray(z, dtype=float)
    return np.sqrt(1.0 + np.sum(z * z, axis=-1))


def _t_minus_z1(z):
    # t - z1 without cancellation: for z1 > 0 use (t - z1)(t + z1) = 1 + |z_hat|^2
    t = hyperboloid_t(z)
    z1 = z[..., 0]
    zhat2 = np.sum(z[..., 1:] ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = (1.0 + zhat2) / (t + z1)
    return np.where(z1 > 0, safe, t - z1)


def _hyper_to_half(z):
    d = _t_minus_z1(z)
    y = np.empty_like(z)
    y[..., 0] = 1.0 / d
    y[..., 1:] = z[..., 1:] / d[..., None]
    return y


def _half_to_hyper(y):
    y1 = y[..., 0]
    yhat2 = np.sum(y[..., 1:] ** 2, axis=-1)
    z = np.empty_like(y)
    z[..., 0] = 0.5 * y1 + (yhat2 - 1.0) / (2.0 * y1)
    z[..., 1:] = y[..., 1:] / y1[..., None]
    return z


def _half_to_horo(y):
    x = y.copy()
    x[..., 0] = -np.log(y[..., 0])
    return x


def _horo_to_half(x):
    with np.errstate(over="raise", under="ignore"):
        try:
            y1 = np.exp(-x[..., 0])
        except FloatingPointError as exc:
            raise NonFinite("e^{-x_1} overflows; use log-scaled quantities") from exc
    if np.any(y1 == 0.0):
        raise NonFinite("e^{-x_1} underflows to 0; use log-scaled quantities")
    y = x.copy()
    y[..., 0] = y1
    return y


def to_chart(p: Point, target: ChartId) -> Point:
    """Express the same geometric point(s) in another hyperbolic chart."""
    if p.chart is target:
        return Point(target, p.coords.copy())
    if p.chart not in _HYPERBOLIC_CHARTS or target not in _HYPERBOLIC_CHARTS:
        raise ValidationError("transforms exist only among the three hyperbolic charts")
    c = p.coords
    # route everything through the half-space chart
    if p.chart is ChartId.HYPERBOLOIDAL:
        y = _hyper_to_half(c)
    elif p.chart is ChartId.HOROSPHERICAL:
        y = _horo_to_half(c)
    else:
        y = c
    if target is ChartId.HALFSPACE:
        out = y
    elif target is ChartId.HOROSPHERICAL:
        out = _half_to_horo(y)
    else:
        out = _half_to_hyper(y)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"transform {p.chart.value} -> {target.value} overflowed")
    return Point(target, out)


def radial_coordinate(x1, rho):
    """Hyperboloidal radius r of the horospherical point (x1, |x_hat| = rho).

    r^2 = u^2 - 1 with u = cosh x1 + e^{x1} rho^2 / 2, evaluated as
    (u - 1)(u + 1) where u - 1 = 2 sinh^2(x1/2) + e^{x1} rho^2 / 2.
    """
    x1 = np.asarray(x1, dtype=float)
    rho = np.asarray(rho, dtype=float)
    um1 = 2.0 * np.sinh(0.5 * x1) ** 2 + 0.5 * np.exp(x1) * rho * rho
    return np.sqrt(um1 * (um1 + 2.0))


def radius(p: Point):
    """Hyperboloidal r (or Euclidean |x| in the Cartesian chart) of each point."""
    c = p.coords
    if p.chart in (ChartId.HYPERBOLOIDAL, ChartId.CARTESIAN):
        return np.sqrt(np.sum(c * c, axis=-1))
    if p.chart is ChartId.HALFSPACE:
        c = _half_to_horo(c)
    return radial_coordinate(c[..., 0], np.sqrt(np.sum(c[..., 1:] ** 2, axis=-1)))


def hyperboloidal_jet(chart: ChartId, coords):
    """z(x) with its first and second derivatives for a chart x.

    Returns (z, J, K) with J[..., i, a] = dz_i/dx_a and
    K[..., i, a, c] = d^2 z_i / dx_a dx_c.
    """
    x = np.asarray(coords, dtype=float)
    n = x.shape[-1]
    shape = x.shape[:-1]
    eye = np.eye(n)
    if chart is ChartId.HYPERBOLOIDAL:
        J = np.broadcast_to(eye, shape + (n, n)).copy()
        return x.copy(), J, np.zeros(shape + (n, n, n))

    J = np.zeros(shape + (n, n))
    K = np.zeros(shape + (n, n, n))
    if chart is ChartId.HOROSPHERICAL:
        x1 = x[..., 0]
        xh = x[..., 1:]
        e = np.exp(x1)
        rho2 = np.sum(xh * xh, axis=-1)
        z = np.empty_like(x)
        z[..., 0] = -np.sinh(x1) + 0.5 * e * rho2
        z[..., 1:] = e[..., None] * xh
        J[..., 0, 0] = -np.cosh(x1) + 0.5 * e * rho2
        J[..., 0, 1:] = e[..., None] * xh
        J[..., 1:, 0] = z[..., 1:]
        J[..., 1:, 1:] = e[..., None, None] * eye[1:, 1:]
        K[..., 0, 0, 0] = z[..., 0]
        K[..., 0, 0, 1:] = e[..., None] * xh
        K[..., 0, 1:, 0] = e[..., None] * xh
        K[..., 0, 1:, 1:] = e[..., None, None] * eye[1:, 1:]
        K[..., 1:, 0, 0] = z[..., 1:]
        K[..., 1:, 0, 1:] = e[..., None, None] * eye[1:, 1:]
        K[..., 1:, 1:, 0] = e[..., None, None] * eye[1:, 1:]
        return z, J, K

    if chart is ChartId.HALFSPACE:
        y1 = x[..., 0]
        yh = x[..., 1:]
        yh2 = np.sum(yh * yh, axis=-1)
        z = _half_to_hyper(x)
        inv = 1.0 / y1
        J[..., 0, 0] = 0.5 - (yh2 - 1.0) * 0.5 * inv**2
        J[..., 0, 1:] = yh * inv[..., None]
        J[..., 1:, 0] = -yh * (inv**2)[..., None]
        J[..., 1:, 1:] = inv[..., None, None] * eye[1:, 1:]
        K[..., 0, 0, 0] = (yh2 - 1.0) * inv**3
        K[..., 0, 0, 1:] = -yh * (inv**2)[..., None]
        K[..., 0, 1:, 0] = -yh * (inv**2)[..., None]
        K[..., 0, 1:, 1:] = inv[..., None, None] * eye[1:, 1:]
        K[..., 1:, 0, 0] = 2.0 * yh * (inv**3)[..., None]
        K[..., 1:, 0, 1:] = -(inv**2)[..., None, None] * eye[1:, 1:]
        K[..., 1:, 1:, 0] = -(inv**2)[..., None, None] * eye[1:, 1:]
        return z, J, K

    raise ValidationError(f"no hyperboloidal embedding for chart {chart.value}")


def lightcone_jets(chart: ChartId, coords):
    """Value, gradient and Hessian of u = t - z1, w = t + z1 and z_i (i >= 2).

    Returned as arrays of shape (..., n+1), (..., n+1, n) and
    (..., n+1, n, n) with rows ordered (u, w, z_2, ..., z_n). In the
    horospherical and half-space charts each row is evaluated from closed
    forms that involve no subtraction of large numbers.
    """
    x = np.asarray(coords, dtype=float)
    n = x.shape[-1]
    shape = x.shape[:-1]
    eye = np.eye(n)
    val = np.zeros(shape + (n + 1,))
    grad = np.zeros(shape + (n + 1, n))
    hess = np.zeros(shape + (n + 1, n, n))

    if chart is ChartId.HYPERBOLOIDAL:
        t = hyperboloid_t(x)
        dt = x / t[..., None]
        d2t = (eye - x[..., :, None] * x[..., None, :] / (t * t)[..., None, None]) / t[..., None, None]
        u = _t_minus_z1(x)
        val[..., 0] = u
        val[..., 1] = t + x[..., 0]
        grad[..., 0, :] = dt - eye[0]
        grad[..., 1, :] = dt + eye[0]
        hess[..., 0, :, :] = d2t
        hess[..., 1, :, :] = d2t
        val[..., 2:] = x[..., 1:]
        grad[..., 2:, :] = eye[1:]
        return val, grad, hess

    if chart is ChartId.HOROSPHERICAL:
        x1 = x[..., 0]
        xh = x[..., 1:]
        e = np.exp(x1)
        em = np.exp(-x1)
        rho2 = np.sum(xh * xh, axis=-1)
        val[..., 0] = e
        grad[..., 0, 0] = e
        hess[..., 0, 0, 0] = e
        val[..., 1] = em + e * rho2
        grad[..., 1, 0] = -em + e * rho2
        grad[..., 1, 1:] = 2.0 * e[..., None] * xh
        hess[..., 1, 0, 0] = em + e * rho2
        hess[..., 1, 0, 1:] = 2.0 * e[..., None] * xh
        hess[..., 1, 1:, 0] = 2.0 * e[..., None] * xh
        hess[..., 1, 1:, 1:] = 2.0 * e[..., None, None] * eye[1:, 1:]
        zi = e[..., None] * xh
        val[..., 2:] = zi
        grad[..., 2:, 0] = zi
        grad[..., 2:, 1:] = e[..., None, None] * eye[1:, 1:]
        hess[..., 2:, 0, 0] = zi
        hess[..., 2:, 0, 1:] = e[..., None, None] * eye[1:, 1:]
        hess[..., 2:, 1:, 0] = e[..., None, None] * eye[1:, 1:]
        return val, grad, hess

    if chart is ChartId.HALFSPACE:
        y1 = x[..., 0]
        yh = x[..., 1:]
        inv = 1.0 / y1
        yh2 = np.sum(yh * yh, axis=-1)
        val[..., 0] = inv
        grad[..., 0, 0] = -inv**2
        hess[..., 0, 0, 0] = 2.0 * inv**3
        val[..., 1] = y1 + yh2 * inv
        grad[..., 1, 0] = 1.0 - yh2 * inv**2
        grad[..., 1, 1:] = 2.0 * yh * inv[..., None]
        hess[..., 1, 0, 0] = 2.0 * yh2 * inv**3
        hess[..., 1, 0, 1:] = -2.0 * yh * (inv**2)[..., None]
        hess[..., 1, 1:, 0] = -2.0 * yh * (inv**2)[..., None]
        hess[..., 1, 1:, 1:] = 2.0 * inv[..., None, None] * eye[1:, 1:]
        val[..., 2:] = yh * inv[..., None]
        grad[..., 2:, 0] = -yh * (inv**2)[..., None]
        grad[..., 2:, 1:] = inv[..., None, None] * eye[1:, 1:]
        hess[..., 2:, 0, 0] = 2.0 * yh * (inv**3)[..., None]
        hess[..., 2:, 0, 1:] = -(inv**2)[..., None, None] * eye[1:, 1:]
        hess[..., 2:, 1:, 0] = -(inv**2)[..., None, None] * eye[1:, 1:]
        return val, grad, hess

    raise ValidationError(f"static potentials are not defined in chart {chart.value}")


def rotation_to_e1(a) -> np.ndarray:
    """An orthogonal matrix R with R @ a = e_1 (a Householder reflection, or I)."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if not np.isclose(norm, 1.0, rtol=0, atol=1e-12):
        raise ValidationError("direction must be a unit vector")
    e1 = np.zeros_like(a)
    e1[0] = 1.0
    v = a / norm - e1
    vv = v @ v
    if vv < 1e-30:
        return np.eye(a.size)
    return np.eye(a.size) - 2.0 * np.outer(v, v) / vv


def rotation_matrix(n: int, i: int, j: int, angle: float) -> np.ndarray:
    """Rotation by ``angle`` in the (z_i, z_j) coordinate plane."""
    R = np.eye(n)
    c, s = np.cos(angle), np.sin(angle)
    R[i, i] = R[j, j] = c
    R[i, j], R[j, i] = -s, s
    return R

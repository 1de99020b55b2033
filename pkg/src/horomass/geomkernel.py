"""Pointwise differential geometry for metric models.

Everything operates on batches: coordinates of shape (N, n), with derivative
indices first, e.g. ``Gamma[..., k, i, j] = Gamma^k_ij``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .charts import ChartId, Point
from .errors import DegenerateLevelSet, SingularMetric, UnsupportedSurface
from .metrics import FD_STEP_FIRST, FD_STEP_SECOND, Jet, MetricModel, _central_diff

COND_LIMIT = 1e12
GRAD_FLOOR = 1e-12


# ------------------------------------------------------------ scalar fields

@dataclass(frozen=True, eq=False)
class ScalarField:
    """V with optional analytic gradient and Hessian in chart coordinates.

    ``value(chart, x)`` returns shape (N,); ``derivs(chart, x)`` if given
    returns (value, grad (N, n), hess (N, n, n)).
    """

    value: Callable
    derivs: Optional[Callable] = None
    name: str = "V"

    def jet(self, chart, x, fd=False):
        if self.derivs is not None and not fd:
            return self.derivs(chart, x)
        f = lambda p: self.value(chart, p)
        grad = _central_diff(f, x, FD_STEP_FIRST, chart)
        hess = _central_diff(lambda p: _central_diff(f, p, FD_STEP_FIRST, chart), x, FD_STEP_SECOND, chart)
        return f(x), grad, 0.5 * (hess + np.swapaxes(hess, -1, -2))


def coordinate_field(index: int) -> ScalarField:
    """F = x_index in whatever chart the points live in."""

    def derivs(chart, x):
        N, n = x.shape
        g = np.zeros((N, n))
        g[:, index] = 1.0
        return x[:, index].copy(), g, np.zeros((N, n, n))

    return ScalarField(lambda c, x: x[:, index].copy(), derivs, name=f"x{index + 1}")


def _norm_jet(v, offset=0):
    """|v| over the coordinates from ``offset`` on, with its derivatives in the full chart."""
    N, n = v.shape
    w = v.copy()
    w[:, :offset] = 0.0
    r = np.sqrt(np.sum(w * w, axis=-1))
    e = w / r[:, None]
    P = np.eye(n)
    P[:offset, :offset] = 0.0
    hess = (P - e[:, :, None] * e[:, None, :]) / r[:, None, None]
    return r, e, hess


def radius_field() -> ScalarField:
    """F = |z| (hyperboloidal) or |x| (Cartesian)."""
    return ScalarField(lambda c, x: np.sqrt(np.sum(x * x, axis=-1)),
                       lambda c, x: _norm_jet(x), name="r")


def hat_radius_field() -> ScalarField:
    """F = |x_hat| = rho in the horospherical chart."""
    return ScalarField(lambda c, x: np.sqrt(np.sum(x[:, 1:] ** 2, axis=-1)),
                       lambda c, x: _norm_jet(x, 1), name="rho")


# --------------------------------------------------------------- tensors

def christoffel_from(ginv, dg):
    T = (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, T)


def _check_conditioning(binv, g):
    # conditioning of g relative to b; the diagonal scaling of b itself is harmless
    M = binv @ g
    ev = np.abs(np.linalg.eigvals(M))
    with np.errstate(divide="ignore"):
        cond = ev.max(axis=-1) / ev.min(axis=-1)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise SingularMetric("metric is numerically non-invertible (condition number > 1e12)")


def inverse_metric(jet: Jet):
    """g^{-1} = (I + b^{-1} h)^{-1} b^{-1}, which only inverts a well-conditioned matrix."""
    n = jet.b.shape[-1]
    M = jet.binv @ jet.h
    _check_conditioning(np.eye(n), np.eye(n) + M)
    return np.linalg.solve(np.eye(n) + M, jet.binv)


def background_christoffel(jet: Jet):
    return christoffel_from(jet.binv, jet.db)


def background_covariant_dh(jet: Jet, gamma_b=None):
    """nabla-ring_k h_ij = d_k h_ij - Gamma^l_ki h_lj - Gamma^l_kj h_il."""
    G = background_christoffel(jet) if gamma_b is None else gamma_b
    return (jet.dh - np.einsum("...lki,...lj->...kij", G, jet.h)
            - np.einsum("...lkj,...il->...kij", G, jet.h))


def christoffel(model: MetricModel, p: Point):
    """Gamma^k_ij of g at p (batched if p holds several points)."""
    jet = model.jet(p.chart, np.atleast_2d(p.coords))
    ginv = inverse_metric(jet)
    G = christoffel_from(ginv, jet.dg)
    return G[0] if p.coords.ndim == 1 else G


def hessian_scalar(model: MetricModel, V: ScalarField, p: Point):
    """(Hess_g V, Laplacian_g V) at p."""
    x = np.atleast_2d(p.coords)
    jet = model.jet(p.chart, x)
    ginv = inverse_metric(jet)
    G = christoffel_from(ginv, jet.dg)
    _, dV, ddV = V.jet(p.chart, x, fd=model.fd)
    hess = ddV - np.einsum("...kij,...k->...ij", G, dV)
    lap = np.einsum("...ij,...ij->...", ginv, hess)
    if p.coords.ndim == 1:
        return hess[0], lap[0]
    return hess, lap


def scalar_curvature(model: MetricModel, p: Point):
    """R_g from Christoffels; derivatives of Gamma by central differences (relative step 1e-4)."""
    x = np.atleast_2d(p.coords)

    def gamma(y):
        j = model.jet(p.chart, y)
        return christoffel_from(inverse_metric(j), j.dg)

    G = gamma(x)
    dG = _central_diff(gamma, x, FD_STEP_SECOND, p.chart)  # dG[l, k, i, j] = d_l Gamma^k_ij
    j = model.jet(p.chart, x)
    ginv = inverse_metric(j)
    ric = (np.einsum("...kkij->...ij", dG) - np.einsum("...jkik->...ij", dG)
           + np.einsum("...kkl,...lij->...ij", G, G) - np.einsum("...kjl,...lik->...ij", G, G))
    R = np.einsum("...ij,...ij->...", ginv, ric)
    return R[0] if p.coords.ndim == 1 else R


# ------------------------------------------------------- level-set geometry

@dataclass(frozen=True)
class LevelSetGeometry:
    """Geometry of level sets of F at a batch of points.

    ``area_density`` is the ratio of the induced g-area element to the
    induced b-area element (1 for the background itself).
    """

    nu: np.ndarray
    H: np.ndarray
    A: np.ndarray
    grad_norm: np.ndarray
    area_density: np.ndarray


def _level_set(g, ginv, G, dF, ddF, s):
    hess = ddF - np.einsum("...kij,...k->...ij", G, dF)
    w = np.einsum("...ij,...j->...i", ginv, dF)
    D2 = np.einsum("...i,...i->...", dF, w)
    if np.any(D2 <= GRAD_FLOOR**2):
        raise DegenerateLevelSet("|grad F|_g vanishes at a level-set point")
    D = np.sqrt(D2)
    lap = np.einsum("...ij,...ij->...", ginv, hess)
    hww = np.einsum("...ij,...i,...j->...", hess, w, w)
    H = s * (lap - hww / D2) / D
    nu = s * w / D[..., None]
    nu_flat = s * dF / D[..., None]
    n = dF.shape[-1]
    Pi = np.eye(n) - nu[..., :, None] * nu_flat[..., None, :]  # Pi^i_a
    A = s * np.einsum("...ia,...ij,...jb->...ab", Pi, hess, Pi) / D[..., None, None]
    return nu, H, A, D, hess, w


def level_set_geometry(model: MetricModel, V: ScalarField, p: Point, orientation: int = 1,
                       *, background: bool = False) -> LevelSetGeometry:
    """Normal, mean curvature and second fundamental form of {V = const} in g (or b)."""
    x = np.atleast_2d(p.coords)
    jet = model.jet(p.chart, x)
    _, dF, ddF = V.jet(p.chart, x, fd=model.fd)
    if background:
        g, ginv, dg = jet.b, jet.binv, jet.db
    else:
        g, ginv, dg = jet.g, inverse_metric(jet), jet.dg
    G = christoffel_from(ginv, dg)
    nu, H, A, D, _, _ = _level_set(g, ginv, G, dF, ddF, orientation)
    ratio = 1.0 if background else 1.0 + area_ratio_minus_one(jet, dF)
    ratio = np.broadcast_to(ratio, H.shape).copy()
    out = LevelSetGeometry(nu, H, A, D, ratio)
    if p.coords.ndim == 1:
        return LevelSetGeometry(nu[0], H[0], A[0], D[0], ratio[0])
    return out


def _logdet_1p(M, hnorm):
    """log det(I + M): short trace series when M is small, slogdet otherwise."""
    n = M.shape[-1]
    series = np.zeros(M.shape[:-2])
    Mk = np.broadcast_to(np.eye(n), M.shape)
    for k in range(1, 10):
        Mk = Mk @ M
        series = series + (-1) ** (k + 1) * np.trace(Mk, axis1=-2, axis2=-1) / k
    small = hnorm < 1e-2
    if np.all(small):
        return series
    sign, ld = np.linalg.slogdet(np.eye(n) + M)
    if np.any(sign[~small] <= 0):
        raise SingularMetric("g is not positive definite")
    return np.where(small, series, ld)


def area_ratio_minus_one(jet: Jet, dF):
    """dsigma_g / dsigma_b - 1 on level sets of F, without cancellation for tiny h."""
    M = jet.binv @ jet.h
    hnorm = np.sqrt(np.maximum(np.einsum("...ij,...ji->...", M, M), 0.0))
    ld = _logdet_1p(M, hnorm)
    wb = np.einsum("...ij,...j->...i", jet.binv, dF)
    Db2 = np.einsum("...i,...i->...", dF, wb)
    ginv = inverse_metric(jet)
    dginv = -np.einsum("...ij,...jk,...kl->...il", jet.binv, jet.h, ginv)
    dD2 = np.einsum("...i,...ij,...j->...", dF, dginv, dF)
    return np.expm1(0.5 * (ld + np.log1p(dD2 / Db2)))


@dataclass(frozen=True)
class CurvatureDifference:
    """H_g - H_b and related quantities on level sets of F at a batch of points."""

    dH: np.ndarray
    H_b: np.ndarray
    ratio_m1: np.ndarray
    nu_b: np.ndarray
    A_b: np.ndarray
    Db: np.ndarray
    hess_b: np.ndarray
    nabla_h: np.ndarray


def mean_curvature_difference(jet: Jet, dF, ddF, s) -> CurvatureDifference:
    """H_g - H_b computed from h directly, accurate even when h is ~1e-30 relative to b."""
    binv = jet.binv
    Gb = background_christoffel(jet)
    nh = background_covariant_dh(jet, Gb)
    ginv = inverse_metric(jet)
    dginv = -np.einsum("...ij,...jk,...kl->...il", binv, jet.h, ginv)
    T = (np.einsum("...ijl->...lij", nh) + np.einsum("...jil->...lij", nh) - nh)
    dGam = 0.5 * np.einsum("...kl,...lij->...kij", ginv, T)

    P = ddF - np.einsum("...kij,...k->...ij", Gb, dF)
    Q = -np.einsum("...kij,...k->...ij", dGam, dF)
    wb = np.einsum("...ij,...j->...i", binv, dF)
    dw = np.einsum("...ij,...j->...i", dginv, dF)
    wg = wb + dw
    Db2 = np.einsum("...i,...i->...", dF, wb)
    if np.any(Db2 <= GRAD_FLOOR**2):
        raise DegenerateLevelSet("|grad F|_b vanishes at a level-set point")
    dD2 = np.einsum("...i,...i->...", dF, dw)
    Dg2 = Db2 + dD2
    Db, Dg = np.sqrt(Db2), np.sqrt(Dg2)

    Pww = np.einsum("...ij,...i,...j->...", P, wb, wb)
    Nb = np.einsum("...ij,...ij->...", binv, P) - Pww / Db2
    dLap = np.einsum("...ij,...ij->...", dginv, P) + np.einsum("...ij,...ij->...", ginv, Q)
    cross = (2.0 * np.einsum("...ij,...i,...j->...", P, wb, dw)
             + np.einsum("...ij,...i,...j->...", P, dw, dw)
             + np.einsum("...ij,...i,...j->...", Q, wg, wg))
    dN = dLap - cross / Dg2 + Pww * dD2 / (Dg2 * Db2)
    d_inv = -dD2 / (Dg * Db * (Dg + Db))
    dH = s * (dN / Dg + Nb * d_inv)
    H_b = s * Nb / Db

    M = binv @ jet.h
    hnorm = np.sqrt(np.maximum(np.einsum("...ij,...ji->...", M, M), 0.0))
    ld = _logdet_1p(M, hnorm)
    ratio_m1 = np.expm1(0.5 * (ld + np.log1p(dD2 / Db2)))

    nu_b = s * wb / Db[..., None]
    n = dF.shape[-1]
    Pi = np.eye(n) - nu_b[..., :, None] * (s * dF / Db[..., None])[..., None, :]
    A_b = s * np.einsum("...ia,...ij,...jb->...ab", Pi, P, Pi) / Db[..., None, None]
    return CurvatureDifference(dH, H_b, ratio_m1, nu_b, A_b, Db, P, nh)


# ----------------------------------------------------- closed-form oracles

def closed_form_second_fundamental(kind: str, params: dict, x):
    """Exact A of spheres (hyperboloidal chart), horospheres and lateral cylinders
    (horospherical chart) in pure hyperbolic space, as covariant chart matrices."""
    from .metrics import Background, background_jet

    x = np.atleast_2d(np.asarray(x, dtype=float))
    N, n = x.shape
    if kind == "sphere":
        b, _, _ = background_jet(Background.HYPERBOLIC, ChartId.HYPERBOLOIDAL, x)
        r = np.sqrt(np.sum(x * x, axis=-1))
        # b-unit conormal 1-form of S_r is dr / |dr|_b = (z/r) / sqrt(1+r^2)
        nu_flat = x / (r * np.sqrt(1.0 + r * r))[:, None]
        A = (np.sqrt(1.0 + r * r) / r)[:, None, None] * (b - nu_flat[:, :, None] * nu_flat[:, None, :])
        return A
    if kind == "horosphere":
        b, _, _ = background_jet(Background.HYPERBOLIC, ChartId.HOROSPHERICAL, x)
        A = b.copy()
        A[:, 0, :] = 0.0
        A[:, :, 0] = 0.0
        return A
    if kind == "lateral":
        sigma = params.get("sigma")
        rho = np.sqrt(np.sum(x[:, 1:] ** 2, axis=-1))
        if sigma is not None and not np.allclose(rho, sigma, rtol=1e-12):
            raise UnsupportedSurface("points are not on the lateral surface |x_hat| = sigma")
        e = np.zeros_like(x)
        e[:, 1:] = x[:, 1:] / rho[:, None]
        Pang = np.eye(n) - e[:, :, None] * e[:, None, :]
        Pang[:, 0, :] = 0.0
        Pang[:, :, 0] = 0.0
        return (np.exp(x[:, 0]) / rho)[:, None, None] * Pang
    raise UnsupportedSurface(f"no closed-form second fundamental form for {kind!r}")

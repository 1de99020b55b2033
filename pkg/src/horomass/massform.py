"""Static potentials, the mass 1-form and its mean-curvature decomposition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import charts
from .charts import ChartId, Point
from .errors import SmallnessViolated, ValidationError
from .geomkernel import (ScalarField, background_christoffel, background_covariant_dh,
                         mean_curvature_difference)
from .metrics import Jet, MetricModel

SMALLNESS = 0.5


@dataclass(frozen=True, eq=False)
class StaticPotential:
    """V = c_t * t - sum_i a_i z_i."""

    c_t: float
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    @classmethod
    def horosphere(cls, a) -> "StaticPotential":
        a = np.asarray(a, dtype=float)
        if not np.isclose(np.linalg.norm(a), 1.0, rtol=0, atol=1e-12):
            raise ValidationError("horosphere direction must be a unit vector")
        return cls(1.0, tuple(a))

    @classmethod
    def t(cls, n):
        return cls(1.0, (0.0,) * n)

    @classmethod
    def z(cls, n, i):
        """The potential z_i (0-based index), i.e. c_t = 0 and a = -e_i."""
        a = np.zeros(n)
        a[i] = -1.0
        return cls(0.0, tuple(a))

    @property
    def n(self):
        return len(self.a)

    def __add__(self, other):
        return StaticPotential(self.c_t + other.c_t, tuple(np.add(self.a, other.a)))

    def jet(self, chart: ChartId, x, fd=False):
        """Value, coordinate gradient and coordinate Hessian (all analytic)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if chart is ChartId.CARTESIAN:
            if any(self.a):
                raise ValidationError("only constant potentials exist on a Euclidean background")
            N, n = x.shape
            return np.full(N, self.c_t), np.zeros((N, n)), np.zeros((N, n, n))
        val, grad, hess = charts.lightcone_jets(chart, x)
        a = np.asarray(self.a)
        coef = np.concatenate([[0.5 * (self.c_t + a[0]), 0.5 * (self.c_t - a[0])], -a[1:]])
        return (val @ coef, np.einsum("...rk,r->...k", grad, coef),
                np.einsum("...rkl,r->...kl", hess, coef))

    def as_field(self) -> ScalarField:
        return ScalarField(lambda c, x: self.jet(c, x)[0], lambda c, x: self.jet(c, x), name="V")


def eval_potential(V: StaticPotential, p: Point):
    """(value, b-gradient vector) of V at p in p's chart."""
    from .metrics import Background, background_jet

    x = np.atleast_2d(p.coords)
    val, dV, _ = V.jet(p.chart, x)
    bg = Background.EUCLIDEAN if p.chart is ChartId.CARTESIAN else Background.HYPERBOLIC
    _, _, binv = background_jet(bg, p.chart, x)
    grad = np.einsum("...ij,...j->...i", binv, dV)
    if p.coords.ndim == 1:
        return val[0], grad[0]
    return val, grad


# ------------------------------------------------------------ the 1-form

def mass_one_form_from_jet(jet: Jet, V, dV, nu0, nabla_h=None):
    """U(V)(nu0) = [V div h - V d tr h + tr h dV - h(grad V, .)](nu0), all w.r.t. b."""
    binv = jet.binv
    nh = background_covariant_dh(jet) if nabla_h is None else nabla_h
    div = np.einsum("...ik,...ikj->...j", binv, nh)
    dtr = np.einsum("...ik,...jik->...j", binv, nh)
    tr = np.einsum("...ik,...ik->...", binv, jet.h)
    gradV = np.einsum("...ij,...j->...i", binv, dV)
    U = (V[..., None] * (div - dtr) + tr[..., None] * dV
         - np.einsum("...jk,...k->...j", jet.h, gradV))
    return np.einsum("...j,...j->...", U, nu0)


def mass_one_form(model: MetricModel, V: StaticPotential, p: Point, nu0):
    x = np.atleast_2d(p.coords)
    jet = model.jet(p.chart, x)
    val, dV, _ = V.jet(p.chart, x)
    nu0 = np.broadcast_to(np.asarray(nu0, dtype=float), x.shape)
    out = mass_one_form_from_jet(jet, val, dV, nu0)
    return out[0] if p.coords.ndim == 1 else out


# ------------------------------------------------------- decomposition

@dataclass(frozen=True)
class MassOneFormSample:
    """U(V)(nu0) split as mean_curv + trace + A_dot_h + div + remainder.

    ``div_term_flux`` is -div_Sigma(V X) evaluated pointwise; surface
    integrators turn it into an edge flux instead of summing it.
    """

    value: np.ndarray
    mean_curv_term: np.ndarray
    trace_term: np.ndarray
    A_dot_h_term: np.ndarray
    div_term_flux: np.ndarray
    remainder: np.ndarray
    h_norm: np.ndarray
    remainder_scale: np.ndarray


@dataclass(frozen=True)
class SurfaceFrame:
    """Background normal data of a level-set surface at a batch of points."""

    nu: np.ndarray        # b-unit normal vector nu^i
    nu_flat: np.ndarray   # nu_i
    dnu: np.ndarray       # nabla-ring_i nu_j (covariant in both)
    Pi: np.ndarray        # b^{ij} - nu^i nu^j
    A: np.ndarray         # second fundamental form w.r.t. nu


def surface_frame(jet: Jet, dF, ddF, s) -> SurfaceFrame:
    binv = jet.binv
    G = background_christoffel(jet)
    P = ddF - np.einsum("...kij,...k->...ij", G, dF)
    wb = np.einsum("...ij,...j->...i", binv, dF)
    D = np.sqrt(np.einsum("...i,...i->...", dF, wb))
    nflat = dF / D[..., None]
    nvec = wb / D[..., None]
    Pn = np.einsum("...ik,...k->...i", P, nvec)
    dn = (P - Pn[..., :, None] * nflat[..., None, :]) / D[..., None, None]
    nu, nu_flat = s * nvec, s * nflat
    Pi = binv - nu[..., :, None] * nu[..., None, :]
    n = dF.shape[-1]
    proj = np.eye(n) - nu[..., :, None] * nu_flat[..., None, :]
    A = s * np.einsum("...ia,...ij,...jb->...ab", proj, P, proj) / D[..., None, None]
    return SurfaceFrame(nu, nu_flat, s * dn, Pi, A)


def tangential_X(jet: Jet, frame: SurfaceFrame):
    """X_j = h(nu, .)_j - h(nu, nu) nu_j, the b|Sigma-dual of h(nu0, .) on tangent vectors."""
    hnu = np.einsum("...jk,...k->...j", jet.h, frame.nu)
    hnn = np.einsum("...j,...j->...", hnu, frame.nu)
    return hnu - hnn[..., None] * frame.nu_flat


def div_sigma_X(jet: Jet, frame: SurfaceFrame, nabla_h):
    binv, h, nu = jet.binv, jet.h, frame.nu
    dnu_up = np.einsum("...il,...kl->...ik", frame.dnu, binv)  # nabla_i nu^k
    hnn = np.einsum("...kl,...k,...l->...", h, nu, nu)
    d_hnn = (np.einsum("...ikl,...k,...l->...i", nabla_h, nu, nu)
             + 2.0 * np.einsum("...kl,...k,...il->...i", h, nu, dnu_up))
    dX = (np.einsum("...ijk,...k->...ij", nabla_h, nu)
          + np.einsum("...jk,...ik->...ij", h, dnu_up)
          - d_hnn[..., :, None] * frame.nu_flat[..., None, :]
          - hnn[..., None, None] * frame.dnu)
    return np.einsum("...ij,...ij->...", frame.Pi, dX)


def decompose(jet: Jet, V, dV, dF, ddF, s, check_smallness=True) -> MassOneFormSample:
    """Pointwise decomposition of U(V)(nu0) on level sets of F with orientation s."""
    binv, h = jet.binv, jet.h
    M = binv @ h
    hnorm = np.sqrt(np.maximum(np.einsum("...ij,...ji->...", M, M), 0.0))
    if check_smallness and np.any(hnorm >= SMALLNESS):
        raise SmallnessViolated(f"|h|_b = {float(hnorm.max()):.3g} >= {SMALLNESS}")
    cd = mean_curvature_difference(jet, dF, ddF, s)
    nh = cd.nabla_h
    frame = surface_frame(jet, dF, ddF, s)
    value = mass_one_form_from_jet(jet, V, dV, frame.nu, nh)
    main = -2.0 * V * cd.dH
    trace = np.einsum("...ij,...ij->...", frame.Pi, h) * np.einsum("...i,...i->...", dV, frame.nu)
    Ah = -V * np.einsum("...ik,...jl,...kl,...ij->...", binv, binv, frame.A, h)
    X = tangential_X(jet, frame)
    Xup = np.einsum("...ij,...j->...i", binv, X)
    div = -(V * div_sigma_X(jet, frame, nh) + np.einsum("...i,...i->...", dV, Xup))
    rem = value - (main + trace + Ah + div)
    Anorm = np.sqrt(np.einsum("...ik,...jl,...ij,...kl->...", binv, binv, frame.A, frame.A))
    dhn = np.sqrt(np.maximum(np.einsum("...ka,...ib,...jc,...kij,...abc->...", binv, binv, binv, nh, nh), 0))
    scale = np.abs(V) * (Anorm * hnorm**2 + dhn * hnorm)
    return MassOneFormSample(value, main, trace, Ah, div, rem, hnorm, scale)


def decomposition(model: MetricModel, V: StaticPotential, surface: ScalarField, p: Point,
                  orientation: int = 1) -> MassOneFormSample:
    """Decomposition at points p of the level set of ``surface`` through them."""
    x = np.atleast_2d(p.coords)
    jet = model.jet(p.chart, x)
    val, dV, _ = V.jet(p.chart, x)
    _, dF, ddF = surface.jet(p.chart, x)
    return decompose(jet, val, dV, dF, ddF, orientation)


def tangential_dual_X(model: MetricModel, surface: ScalarField, p: Point, orientation: int = 1):
    """X as a vector (upper index) on the level set of ``surface`` through p."""
    x = np.atleast_2d(p.coords)
    jet = model.jet(p.chart, x)
    _, dF, ddF = surface.jet(p.chart, x)
    frame = surface_frame(jet, dF, ddF, orientation)
    X = np.einsum("...ij,...j->...i", jet.binv, tangential_X(jet, frame))
    return X[0] if p.coords.ndim == 1 else X


def edge_flux_density(jet: Jet, frame: SurfaceFrame, V, eta):
    """V <X, eta>_b for a b-unit conormal vector eta."""
    X = tangential_X(jet, frame)
    return V * np.einsum("...j,...j->...", X, eta)

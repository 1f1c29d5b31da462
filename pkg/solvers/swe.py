"""Two-dimensional Saint-Venant solver with a well-balanced Lagrangian Riemann solver.

The scheme is the shallow-water specialization of the Lagrange-flux method:
at every face a Lagrangian approximate Riemann solver gives the contact velocity
``u*`` and depth ``h*``; mass and momentum are upwinded on ``u*``; the pressure
``g h*^2/2`` and the gravity source are combined so that a lake at rest is
preserved to rounding. Dry areas carry an auxiliary "dry velocity" that is
blended with ``hu/h`` through a Tykhonov-regularized projection. Layers thinner than
``h_thin`` get a desingularized velocity so near-dry fronts cannot run away.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from solvers.base import BaseSolver, SweParams, WetDryParams
from src.core import (
    BoundarySpec,
    Grid2D,
    ensure_finite,
    flux_divergence,
    get_integrator,
    outflow_limiter,
    pad_ghost,
    upwind,
)
from src.errors import DegenerateRiemann, NegativeDepth

logger = logging.getLogger(__name__)

# round-off tolerance, relative to the reference depth, below which negative depths are clipped
NEGATIVE_DEPTH_TOLERANCE = 1e-10


@dataclass
class SweState:
    h: np.ndarray
    hu: np.ndarray
    hv: np.ndarray

    @classmethod
    def from_array(cls, array: np.ndarray) -> "SweState":
        return cls(array[0].copy(), array[1].copy(), array[2].copy())

    @classmethod
    def lake_at_rest(cls, z: np.ndarray, level: float) -> "SweState":
        h = np.maximum(level - np.asarray(z, dtype=float), 0.0)
        return cls(h, np.zeros_like(h), np.zeros_like(h))

    def to_array(self) -> np.ndarray:
        return np.stack([self.h, self.hu, self.hv]).astype(float)

    def copy(self) -> "SweState":
        return SweState(self.h.copy(), self.hu.copy(), self.hv.copy())


@dataclass
class Topography:
    z: np.ndarray
    z_edge_x: np.ndarray
    z_edge_y: np.ndarray

    @classmethod
    def from_cells(cls, z: np.ndarray, boundary: BoundarySpec) -> "Topography":
        z = np.asarray(z, dtype=float)
        padded = pad_ghost(z, boundary)
        return cls(
            z=z,
            z_edge_x=0.5 * (padded[1:-1, :-1] + padded[1:-1, 1:]),
            z_edge_y=0.5 * (padded[:-1, 1:-1] + padded[1:, 1:-1]),
        )


@dataclass
class SweRiemannResult:
    u_star: np.ndarray
    h_star: np.ndarray
    p_star: np.ndarray
    z_star: np.ndarray


@dataclass
class DryVelocityField:
    eta: np.ndarray
    u_dry: np.ndarray
    v_dry: np.ndarray

    @classmethod
    def at_rest(cls, grid: Grid2D) -> "DryVelocityField":
        return cls(np.ones(grid.shape), grid.zeros(), grid.zeros())

    def copy(self) -> "DryVelocityField":
        return DryVelocityField(self.eta.copy(), self.u_dry.copy(), self.v_dry.copy())


@dataclass
class SweStepResult:
    state: SweState
    dry: DryVelocityField
    u: np.ndarray
    v: np.ndarray


@dataclass
class _FaceFluxes:
    mass: np.ndarray
    normal: np.ndarray
    tangential: np.ndarray
    h_star: np.ndarray


def sigma_subcharacteristic(h_left, u_left, h_right, u_right, g: float, sigma_floor: float = 0.0):
    """
    Lagrangian speed ``max(c_L, c_R, -(u_R - u_L)_-)`` bounded below by ``sigma_floor``.

    The compression guard keeps ``sigma > |u_R - u_L| / 2`` whenever the two states approach.
    """
    c_l = np.sqrt(g * np.maximum(np.asarray(h_left, dtype=float), 0.0))
    c_r = np.sqrt(g * np.maximum(np.asarray(h_right, dtype=float), 0.0))
    compression = np.maximum(0.0, -(np.asarray(u_right, dtype=float) - np.asarray(u_left, dtype=float)))
    return np.maximum(np.maximum(c_l, c_r), np.maximum(compression, sigma_floor))


def swe_riemann_wet(h_left, u_left, z_left, h_right, u_right, z_right, g: float, sigma) -> SweRiemannResult:
    h_left = np.asarray(h_left, dtype=float)
    h_right = np.asarray(h_right, dtype=float)
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    z_left = np.asarray(z_left, dtype=float)
    z_right = np.asarray(z_right, dtype=float)
    sigma = np.asarray(sigma, dtype=float)

    denominator = 1.0 + (u_right - u_left) / (2.0 * sigma)
    bad = ~(denominator > 0.0)
    if np.any(bad):
        raise DegenerateRiemann("sub-characteristic condition violated",
                                index=int(np.flatnonzero(np.atleast_1d(bad))[0]))

    h_sum = h_left + h_right
    u_star = (h_left * u_left + h_right * u_right) / h_sum \
        - g * ((h_right + z_right) - (h_left + z_left)) / (2.0 * sigma)
    h_star = 0.5 * h_sum / denominator
    return SweRiemannResult(u_star=u_star, h_star=h_star, p_star=0.5 * g * h_star * h_star,
                            z_star=0.5 * (z_left + z_right))


def swe_riemann_dry(u_left, z_left, u_right, z_right, g: float, sigma):
    """Contact velocity when both depths are negligible: the wet solver with unit depths."""
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    return 0.5 * (u_left + u_right) - g * (np.asarray(z_right) - np.asarray(z_left)) / (2.0 * np.asarray(sigma))


def pressure_source_tendency(h_star: np.ndarray, z_edge: np.ndarray, g: float, spacing: float,
                             axis: int = -1) -> np.ndarray:
    """
    Pressure-flux difference plus gravity source along one axis.

    ``-(p*_{j+1/2} - p*_{j-1/2})/dx - g hbar_j (z_{j+1/2} - z_{j-1/2})/dx`` with
    ``hbar_j`` the mean of the two face depths. Since ``p* = g h*^2/2`` this equals
    ``-g hbar_j (eta_{j+1/2} - eta_{j-1/2})/dx`` with face level ``eta = h* + z``,
    which vanishes for a lake at rest.
    """
    h_star = np.moveaxis(np.asarray(h_star, dtype=float), axis, -1)
    level = h_star + np.moveaxis(np.asarray(z_edge, dtype=float), axis, -1)
    h_bar = 0.5 * (h_star[..., 1:] + h_star[..., :-1])
    rate = -g * h_bar * (level[..., 1:] - level[..., :-1]) / spacing
    return np.moveaxis(rate, -1, axis)


def well_balanced_momentum_update(momentum: np.ndarray, flux: np.ndarray, h_star: np.ndarray,
                                  z_edge: np.ndarray, g: float, dt: float, dx: float) -> np.ndarray:
    """
    One explicit momentum update along the last axis.

    Parameters:
    momentum (numpy.ndarray): Normal momentum per cell, ``n`` along the last axis.
    flux (numpy.ndarray): Convected momentum flux ``(hu)_A u*`` per face, ``n + 1`` along the last axis.
    h_star (numpy.ndarray): Contact depth per face.
    z_edge (numpy.ndarray): Face topography ``(z_j + z_{j+1})/2``.
    g, dt, dx (float): Gravity, time step and cell size.

    Returns:
    numpy.ndarray: The updated momentum.
    """
    flux = np.asarray(flux, dtype=float)
    return momentum - dt / dx * (flux[..., 1:] - flux[..., :-1]) \
        + dt * pressure_source_tendency(h_star, z_edge, g, dx, axis=-1)


def blend_velocity(h, hu, u_dry, eps_blend: float):
    """
    Tykhonov-regularized velocity ``(h hu + eps u_dry)/(h^2 + eps)``.

    Written as ``u_dry + h (hu - h u_dry)/(h^2 + eps)`` so that a dry cell returns ``u_dry`` exactly.
    """
    h = np.asarray(h, dtype=float)
    u_dry = np.asarray(u_dry, dtype=float)
    return u_dry + h * (np.asarray(hu, dtype=float) - h * u_dry) / (h * h + eps_blend)


def blend_weight(params: WetDryParams, grid: Grid2D) -> float:
    if params.eps_mode == "adaptive":
        return max(params.eps_blend, grid.min_spacing ** 4)
    return params.eps_blend


def desingularize_momentum(h, hu, h_thin: float):
    """
    Momentum ``h u`` of a thin layer with ``u = sqrt(2) h hu / sqrt(h^4 + max(h^4, h_thin^4))``.

    Layers at least ``h_thin`` deep are returned untouched; below it the velocity
    goes to zero like ``sqrt(2) (h / h_thin)^2 hu / h``.
    """
    h = np.asarray(h, dtype=float)
    hu = np.asarray(hu, dtype=float)
    h2 = h * h
    thin = np.sqrt(2.0) * h2 * hu / np.sqrt(h2 * h2 + h_thin ** 4)
    return np.where(h < h_thin, thin, hu)


def thin_layer_sigma(h_left, h_right, params: SweParams):
    """Riemann speed floor rising from 0 at ``h_thin`` to ``sqrt(g h_ref)`` on an empty face"""
    h_mean = 0.5 * (np.asarray(h_left, dtype=float) + np.asarray(h_right, dtype=float))
    return params.dry_sigma * np.clip(1.0 - h_mean / params.wetdry.h_thin, 0.0, 1.0)


def _face_fluxes(h_l, h_r, un_l, un_r, qn_l, qn_r, qt_l, qt_r, z_l, z_r, params: SweParams) -> _FaceFluxes:
    g = params.gravity
    wetdry = params.wetdry
    sigma = sigma_subcharacteristic(h_l, un_l, h_r, un_r, g, wetdry.sigma_floor)
    sigma = np.maximum(sigma, thin_layer_sigma(h_l, h_r, params))
    wet = (h_l + h_r) >= 2.0 * wetdry.h_wet

    u_star = swe_riemann_dry(un_l, z_l, un_r, z_r, g, np.maximum(sigma, params.dry_sigma))
    h_star = 0.5 * (h_l + h_r)
    if wet.any():
        result = swe_riemann_wet(h_l[wet], un_l[wet], z_l[wet], h_r[wet], un_r[wet], z_r[wet], g, sigma[wet])
        u_star[wet] = result.u_star
        h_star[wet] = result.h_star

    return _FaceFluxes(
        mass=upwind(u_star, h_l, h_r) * u_star,
        normal=upwind(u_star, qn_l, qn_r) * u_star,
        tangential=upwind(u_star, qt_l, qt_r) * u_star,
        h_star=h_star,
    )


X_LEFT = (slice(1, -1), slice(None, -1))
X_RIGHT = (slice(1, -1), slice(1, None))
Y_LOW = (slice(None, -1), slice(1, -1))
Y_HIGH = (slice(1, None), slice(1, -1))


def swe_rhs(array: np.ndarray, dry: DryVelocityField, topography: Topography, params: SweParams,
            grid: Grid2D, dt: float) -> np.ndarray:
    """
    Semi-discrete rate for the stacked ``(h, hu, hv)`` array.

    Mass leaving a cell is limited to what a forward-Euler step of size ``dt``
    can remove, so every stage keeps ``h >= 0``.
    """
    h, hu, hv = array
    eps = blend_weight(params.wetdry, grid)
    h_thin = params.wetdry.h_thin
    u = blend_velocity(h, desingularize_momentum(h, hu, h_thin), dry.u_dry, eps)
    v = blend_velocity(h, desingularize_momentum(h, hv, h_thin), dry.v_dry, eps)

    bc = params.boundary
    hp = pad_ghost(h, bc)
    zp = pad_ghost(topography.z, bc)
    hup = pad_ghost(hu, bc, odd_x=True)
    hvp = pad_ghost(hv, bc, odd_y=True)
    up = pad_ghost(u, bc, odd_x=True)
    vp = pad_ghost(v, bc, odd_y=True)

    fx = _face_fluxes(hp[X_LEFT], hp[X_RIGHT], up[X_LEFT], up[X_RIGHT], hup[X_LEFT], hup[X_RIGHT],
                      hvp[X_LEFT], hvp[X_RIGHT], zp[X_LEFT], zp[X_RIGHT], params)
    fy = _face_fluxes(hp[Y_LOW], hp[Y_HIGH], vp[Y_LOW], vp[Y_HIGH], hvp[Y_LOW], hvp[Y_HIGH],
                      hup[Y_LOW], hup[Y_HIGH], zp[Y_LOW], zp[Y_HIGH], params)

    theta_x, theta_y = outflow_limiter(fx.mass, fy.mass, h, grid, dt, bc)
    g = params.gravity
    dh = flux_divergence(fx.mass * theta_x, fy.mass * theta_y, grid)
    dhu = flux_divergence(fx.normal * theta_x, fy.tangential * theta_y, grid) \
        + pressure_source_tendency(fx.h_star, topography.z_edge_x, g, grid.dx, axis=1)
    dhv = flux_divergence(fx.tangential * theta_x, fy.normal * theta_y, grid) \
        + pressure_source_tendency(fy.h_star, topography.z_edge_y, g, grid.dy, axis=0)
    return np.stack([dh, dhu, dhv])


def _dry_face_velocity(u_l, u_r, z_l, z_r, params: SweParams):
    sigma = sigma_subcharacteristic(0.0, u_l, 0.0, u_r, params.gravity, params.wetdry.sigma_floor)
    return swe_riemann_dry(u_l, z_l, u_r, z_r, params.gravity, np.maximum(sigma, params.dry_sigma))


def dry_velocity_advance(fields: DryVelocityField, u_actual, topography: Topography, params: SweParams,
                         grid: Grid2D, dt: float, wet_mask: Optional[np.ndarray] = None,
                         h: Optional[np.ndarray] = None) -> DryVelocityField:
    """
    Transport the dry velocity one Lagrange-flux step and relax it toward the flow.

    The pair ``(eta, eta u_dry)`` follows a pressureless system driven by the
    gradient of the free-surface level ``h + z``, which is ``-g eta grad z`` on dry
    ground (``h`` None or zero) and keeps ``u_dry`` at rest in still water.
    Afterwards ``u_dry`` relaxes toward ``u_actual`` with the exact factor
    ``exp(-dt/mu_relax)``. ``u_actual`` is a pair of arrays, or None to skip the
    relaxation; ``wet_mask`` restricts it to wet cells.
    """
    g = params.gravity
    bc = params.boundary
    eta = fields.eta
    qu = eta * fields.u_dry
    qv = eta * fields.v_dry

    etap = pad_ghost(eta, bc)
    up = pad_ghost(fields.u_dry, bc, odd_x=True)
    vp = pad_ghost(fields.v_dry, bc, odd_y=True)
    qup = pad_ghost(qu, bc, odd_x=True)
    qvp = pad_ghost(qv, bc, odd_y=True)
    level = topography.z if h is None else topography.z + h
    lp = pad_ghost(level, bc)
    level_x = 0.5 * (lp[X_LEFT] + lp[X_RIGHT])
    level_y = 0.5 * (lp[Y_LOW] + lp[Y_HIGH])

    us_x = _dry_face_velocity(up[X_LEFT], up[X_RIGHT], lp[X_LEFT], lp[X_RIGHT], params)
    us_y = _dry_face_velocity(vp[Y_LOW], vp[Y_HIGH], lp[Y_LOW], lp[Y_HIGH], params)
    mass_x = upwind(us_x, etap[X_LEFT], etap[X_RIGHT]) * us_x
    mass_y = upwind(us_y, etap[Y_LOW], etap[Y_HIGH]) * us_y
    theta_x, theta_y = outflow_limiter(mass_x, mass_y, eta, grid, dt, bc)

    eta_new = eta + dt * flux_divergence(mass_x * theta_x, mass_y * theta_y, grid)
    qu_new = qu + dt * (
        flux_divergence(upwind(us_x, qup[X_LEFT], qup[X_RIGHT]) * us_x * theta_x,
                        upwind(us_y, qup[Y_LOW], qup[Y_HIGH]) * us_y * theta_y, grid)
        - g * eta * np.diff(level_x, axis=1) / grid.dx
    )
    qv_new = qv + dt * (
        flux_divergence(upwind(us_x, qvp[X_LEFT], qvp[X_RIGHT]) * us_x * theta_x,
                        upwind(us_y, qvp[Y_LOW], qvp[Y_HIGH]) * us_y * theta_y, grid)
        - g * eta * np.diff(level_y, axis=0) / grid.dy
    )

    occupied = eta_new > 1e-12
    u_dry = np.where(occupied, qu_new / np.where(occupied, eta_new, 1.0), fields.u_dry)
    v_dry = np.where(occupied, qv_new / np.where(occupied, eta_new, 1.0), fields.v_dry)

    if u_actual is not None:
        decay = np.exp(-dt / params.wetdry.mu_relax)
        u_target, v_target = u_actual
        relaxed_u = u_target + (u_dry - u_target) * decay
        relaxed_v = v_target + (v_dry - v_target) * decay
        if wet_mask is None:
            u_dry, v_dry = relaxed_u, relaxed_v
        else:
            u_dry = np.where(wet_mask, relaxed_u, u_dry)
            v_dry = np.where(wet_mask, relaxed_v, v_dry)

    ensure_finite("dry velocity", u_dry)
    ensure_finite("dry velocity", v_dry)
    return DryVelocityField(eta=eta_new, u_dry=u_dry, v_dry=v_dry)


def _enforce_depth(h: np.ndarray, params: SweParams) -> np.ndarray:
    tolerance = NEGATIVE_DEPTH_TOLERANCE * params.reference_depth
    if np.any(h < -tolerance):
        raise NegativeDepth(f"depth below -{tolerance:g}", index=int(np.flatnonzero(h < -tolerance)[0]))
    if np.any(h < 0.0):
        logger.debug("clipping %s round-off negative depths", int(np.count_nonzero(h < 0.0)))
    return np.maximum(h, 0.0)


def swe_step(state: SweState, topography: Topography, dryfields: DryVelocityField, params: SweParams,
             grid: Grid2D, dt: float) -> SweStepResult:
    """
    Advance water and dry velocity by one step.

    Args:
    state (SweState): Water state at t^n.
    topography (Topography): Bed elevation (effective bed when debris raises it).
    dryfields (DryVelocityField): Dry velocity from the previous step.
    params (SweParams): Physical and numerical parameters.
    grid (Grid2D): The grid.
    dt (float): Time step.

    Returns:
    SweStepResult: New state, new dry velocity and the blended velocity.
    """
    eps = blend_weight(params.wetdry, grid)
    advance = get_integrator(params.time_scheme)

    def rhs(array):
        return swe_rhs(array, dryfields, topography, params, grid, dt)

    wetdry = params.wetdry
    h, hu, hv = advance(state.to_array(), rhs, dt)
    h = _enforce_depth(h, params)
    wet = h >= wetdry.h_wet
    hu = np.where(wet, desingularize_momentum(h, hu, wetdry.h_thin), 0.0)
    hv = np.where(wet, desingularize_momentum(h, hv, wetdry.h_thin), 0.0)
    for name, values in (("h", h), ("hu", hu), ("hv", hv)):
        ensure_finite(name, values)
    new_state = SweState(h, hu, hv)

    # the dry velocity restarts each step from the blended velocity at t^n with eta = 1;
    # on dry ground it first loses a factor exp(-dt/tau_dry) to friction
    friction = np.where(state.h < wetdry.h_wet, np.exp(-dt / wetdry.tau_dry), 1.0)
    start = DryVelocityField(
        eta=np.ones(grid.shape),
        u_dry=friction * blend_velocity(state.h, state.hu, dryfields.u_dry, eps),
        v_dry=friction * blend_velocity(state.h, state.hv, dryfields.v_dry, eps),
    )
    safe_h = np.where(wet, h, 1.0)
    actual = (np.where(wet, hu / safe_h, 0.0), np.where(wet, hv / safe_h, 0.0))
    new_dry = dry_velocity_advance(start, actual, topography, params, grid, dt, wet_mask=wet, h=state.h)

    return SweStepResult(
        state=new_state,
        dry=new_dry,
        u=blend_velocity(h, hu, new_dry.u_dry, eps),
        v=blend_velocity(h, hv, new_dry.v_dry, eps),
    )


def swe_max_speed(state: SweState, dry: DryVelocityField, params: SweParams, grid: Grid2D) -> float:
    eps = blend_weight(params.wetdry, grid)
    u = blend_velocity(state.h, state.hu, dry.u_dry, eps)
    v = blend_velocity(state.h, state.hv, dry.v_dry, eps)
    c = np.sqrt(params.gravity * state.h)
    speed = np.maximum(np.abs(u), np.abs(v)) + c
    return float(max(np.max(speed), np.max(np.abs(dry.u_dry)), np.max(np.abs(dry.v_dry))))


def energy_diagnostic(state: SweState, topography: Topography, g: float, grid: Grid2D,
                      include_potential: bool = False):
    """
    Per-cell energy ``h|u|^2/2 + g h^2/2`` and its integral over the grid.

    With ``include_potential`` the bed term ``g h z`` is added, giving the full
    entropy of the system over non-flat topography.
    """
    h = state.h
    u = np.divide(state.hu, h, out=np.zeros_like(h), where=h > 0.0)
    v = np.divide(state.hv, h, out=np.zeros_like(h), where=h > 0.0)
    per_cell = 0.5 * h * (u * u + v * v) + 0.5 * g * h * h
    if include_potential:
        per_cell = per_cell + g * h * topography.z
    return float(np.sum(per_cell) * grid.cell_area), per_cell


class SweSolver(BaseSolver):
    name = "swe"

    def __init__(self, params: SweParams, grid: Grid2D):
        super().__init__(params, grid)

    def max_signal_speed(self, state: SweState, dry: Optional[DryVelocityField] = None) -> float:
        if dry is None:
            dry = DryVelocityField.at_rest(self.grid)
        return swe_max_speed(state, dry, self.params, self.grid)

    def step(self, state: SweState, dt: float, topography: Topography = None,
             dry: Optional[DryVelocityField] = None, **kwargs) -> SweStepResult:
        if dry is None:
            dry = DryVelocityField.at_rest(self.grid)
        return swe_step(state, topography, dry, self.params, self.grid, dt)

    def check_state(self, state: SweState) -> None:
        for name, values in (("h", state.h), ("hu", state.hu), ("hv", state.hv)):
            ensure_finite(name, values)
        if np.any(state.h < 0.0):
            raise NegativeDepth("negative depth", index=int(np.flatnonzero(state.h < 0.0)[0]))

    def topography(self, z: np.ndarray) -> Topography:
        return Topography.from_cells(z, self.params.boundary)

    def total_volume(self, state: SweState) -> float:
        return float(np.sum(state.h) * self.grid.cell_area)

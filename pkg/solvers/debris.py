"""Eulerian floating-debris model and its discrete car-following counterpart.

Debris is a density ``rho`` carried by a velocity ``v``. With full interaction
(``lambda = 1``) the system is conservative in ``(rho, rho^2 v)`` and is advanced
with an upwind Lagrange-flux step; drag toward the water velocity and ground
friction in shallow water are integrated exactly per cell. The general-lambda
model is provided in 1D only, together with the particle system it is the
continuum limit of.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from solvers.base import BaseSolver, DebrisParams
from src.core import (
    BoundarySpec,
    Grid2D,
    ensure_finite,
    flux_divergence,
    outflow_limiter,
    pad_ghost,
    upwind,
)
from src.errors import NonPhysicalState, OrderingViolated

logger = logging.getLogger(__name__)

WaterSampler = Tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]

X_LEFT = (slice(1, -1), slice(None, -1))
X_RIGHT = (slice(1, -1), slice(1, None))
Y_LOW = (slice(None, -1), slice(1, -1))
Y_HIGH = (slice(1, None), slice(1, -1))


@dataclass
class DebrisState:
    rho: np.ndarray
    mx: np.ndarray
    my: np.ndarray

    @classmethod
    def from_velocity(cls, rho, vx, vy) -> "DebrisState":
        rho = np.asarray(rho, dtype=float)
        rho2 = rho * rho
        return cls(rho.copy(), rho2 * np.asarray(vx, dtype=float), rho2 * np.asarray(vy, dtype=float))

    @classmethod
    def empty(cls, grid: Grid2D) -> "DebrisState":
        return cls(grid.zeros(), grid.zeros(), grid.zeros())

    def velocity(self, eps_blend: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        """Regularized recovery ``v = rho^2 m / (rho^4 + eps)``; zero where ``rho = 0``."""
        rho2 = self.rho * self.rho
        denominator = rho2 * rho2 + eps_blend
        return rho2 * self.mx / denominator, rho2 * self.my / denominator

    def mass(self, grid: Grid2D) -> float:
        return float(np.sum(self.rho) * grid.cell_area)

    def copy(self) -> "DebrisState":
        return DebrisState(self.rho.copy(), self.mx.copy(), self.my.copy())


@dataclass
class DiscreteDebris:
    x: np.ndarray
    v: np.ndarray
    m: float = 1.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    def gaps(self, gap_min: float = 0.0) -> np.ndarray:
        gaps = np.diff(self.x)
        too_close = gaps <= gap_min
        if np.any(too_close):
            index = int(np.flatnonzero(too_close)[0])
            raise OrderingViolated(f"particles {index} and {index + 1} are not ordered "
                                   f"(gap {gaps[index]:g})", index=index)
        return gaps


def friction_rate(h, params: DebrisParams):
    """
    Ground friction rate per unit mass.

    ``(1/tau_F) max(1, h_f/h) max(0, 1 - h/h_f)^beta``; zero once the water is
    deeper than the plunge depth. ``h`` is clamped to ``1e-12 h_f``.
    """
    h = np.maximum(np.asarray(h, dtype=float), 1e-12 * params.h_f)
    contact = np.maximum(0.0, 1.0 - h / params.h_f) ** params.beta_f
    return np.maximum(1.0, params.h_f / h) * contact / params.tau_f


def debris_source_update(v, u, h, dt: float, params: DebrisParams):
    """
    Exact solution over ``dt`` of ``dv/dt = (u - v)/tau_D - omega_F(h) v`` with frozen ``u`` and ``h``.

    Args:
    v: Debris velocity (component), scalar or per cell.
    u: Water velocity (same component).
    h: Water depth.
    dt (float): Time step, any size.
    params (DebrisParams): Drag and friction parameters.

    Returns:
    The relaxed velocity ``v e^{-r dt} + (1 - e^{-r dt}) u / (tau_D r)``.
    """
    rate = 1.0 / params.tau_d + friction_rate(h, params)
    decay = np.exp(-rate * dt)
    gain = -np.expm1(-rate * dt)
    return np.asarray(v, dtype=float) * decay + gain * np.asarray(u, dtype=float) / (params.tau_d * rate)


def apply_debris_source(state: DebrisState, u: np.ndarray, v: np.ndarray, h: np.ndarray, dt: float,
                        params: DebrisParams) -> DebrisState:
    vx, vy = state.velocity(params.eps_blend)
    vx = debris_source_update(vx, u, h, dt, params)
    vy = debris_source_update(vy, v, h, dt, params)
    return DebrisState.from_velocity(state.rho, vx, vy)


def _contact_velocity(rho_l, v_l, rho_r, v_r):
    total = rho_l + rho_r
    occupied = total > 0.0
    weighted = (rho_l * v_l + rho_r * v_r) / np.where(occupied, total, 1.0)
    return np.where(occupied, weighted, 0.5 * (v_l + v_r))


def _neighbour_range(values: np.ndarray, occupied: np.ndarray, boundary: BoundarySpec):
    """Smallest and largest value over each cell and its four face neighbours, occupied cells only."""
    low = pad_ghost(np.where(occupied, values, np.inf), boundary)
    high = pad_ghost(np.where(occupied, values, -np.inf), boundary)
    stencil = (
        (slice(1, -1), slice(1, -1)),
        (slice(1, -1), slice(None, -2)),
        (slice(1, -1), slice(2, None)),
        (slice(None, -2), slice(1, -1)),
        (slice(2, None), slice(1, -1)),
    )
    return np.min([low[s] for s in stencil], axis=0), np.max([high[s] for s in stencil], axis=0)


def debris_convective_step(state: DebrisState, grid: Grid2D, dt: float,
                           boundary: BoundarySpec = BoundarySpec(),
                           eps_blend: float = 1e-12) -> DebrisState:
    """
    One upwind Lagrange-flux step for ``rho`` and ``rho^2 v`` (full-interaction model).

    The face velocity is the density-weighted mean of the two neighbours; all
    fluxes share the donor-cell outflow clamp on ``rho``. The recovered velocity
    is clipped to the range of the old velocities of the cell and its occupied
    neighbours, so a cell filling from vacuum takes its donor's velocity and not
    ``v / c`` for a filled fraction ``c``.
    """
    vx, vy = state.velocity(eps_blend)
    rp = pad_ghost(state.rho, boundary)
    vxp = pad_ghost(vx, boundary, odd_x=True)
    vyp = pad_ghost(vy, boundary, odd_y=True)
    mxp = pad_ghost(state.mx, boundary, odd_x=True)
    myp = pad_ghost(state.my, boundary, odd_y=True)

    vs_x = _contact_velocity(rp[X_LEFT], vxp[X_LEFT], rp[X_RIGHT], vxp[X_RIGHT])
    vs_y = _contact_velocity(rp[Y_LOW], vyp[Y_LOW], rp[Y_HIGH], vyp[Y_HIGH])
    mass_x = upwind(vs_x, rp[X_LEFT], rp[X_RIGHT]) * vs_x
    mass_y = upwind(vs_y, rp[Y_LOW], rp[Y_HIGH]) * vs_y
    theta_x, theta_y = outflow_limiter(mass_x, mass_y, state.rho, grid, dt, boundary)

    rho = state.rho + dt * flux_divergence(mass_x * theta_x, mass_y * theta_y, grid)
    mx = state.mx + dt * flux_divergence(upwind(vs_x, mxp[X_LEFT], mxp[X_RIGHT]) * vs_x * theta_x,
                                         upwind(vs_y, mxp[Y_LOW], mxp[Y_HIGH]) * vs_y * theta_y, grid)
    my = state.my + dt * flux_divergence(upwind(vs_x, myp[X_LEFT], myp[X_RIGHT]) * vs_x * theta_x,
                                         upwind(vs_y, myp[Y_LOW], myp[Y_HIGH]) * vs_y * theta_y, grid)

    tolerance = 1e-10 * max(float(np.max(state.rho)), 1.0)
    if np.any(rho < -tolerance):
        raise NonPhysicalState("negative debris density", index=int(np.flatnonzero(rho < -tolerance)[0]))
    rho = np.maximum(rho, 0.0)
    empty = rho == 0.0
    mx = np.where(empty, 0.0, mx)
    my = np.where(empty, 0.0, my)

    occupied = state.rho > 0.0
    new_vx, new_vy = DebrisState(rho, mx, my).velocity(eps_blend)
    rho2 = rho * rho
    for old, new, momentum in ((vx, new_vx, mx), (vy, new_vy, my)):
        low, high = _neighbour_range(old, occupied, boundary)
        outside = ~empty & np.isfinite(low) & ((new < low) | (new > high))
        momentum[outside] = rho2[outside] * np.clip(new[outside], low[outside], high[outside])

    for name, values in (("debris density", rho), ("debris momentum", mx), ("debris momentum", my)):
        ensure_finite(name, values)
    return DebrisState(rho, mx, my)


def interaction_term_2d(rho: np.ndarray, v_field: tuple[np.ndarray, np.ndarray], grid: Grid2D,
                        lambda_: float) -> tuple[np.ndarray, np.ndarray]:
    """Anticipation term ``-lambda rho (div v) v`` with central-difference divergence."""
    vx, vy = (np.asarray(c, dtype=float) for c in v_field)
    divergence = np.zeros_like(vx)
    if vx.shape[1] > 1:
        divergence += np.gradient(vx, grid.dx, axis=1)
    if vy.shape[0] > 1:
        divergence += np.gradient(vy, grid.dy, axis=0)
    factor = -lambda_ * np.asarray(rho, dtype=float) * divergence
    return factor * vx, factor * vy


def debris_general_lambda_step_1d(rho: np.ndarray, v: np.ndarray, grid: Grid2D, dt: float, lambda_: float,
                                  boundary: BoundarySpec = BoundarySpec(left="outflow", right="outflow"),
                                  source: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Upwind step of ``d_t rho + d_x(rho v) = 0`` and ``d_t v + d_x((1 - lambda) v^2/2) = s``.

    ``lambda = 0`` is pressureless gas dynamics (delta shocks form);
    ``lambda = 1`` freezes ``v`` and only transports ``rho``.
    """
    rho = np.asarray(rho, dtype=float).reshape(1, -1)
    v = np.asarray(v, dtype=float).reshape(1, -1)
    rp = pad_ghost(rho, boundary)[1:-1]
    vp = pad_ghost(v, boundary, odd_x=True)[1:-1]

    v_star = 0.5 * (vp[:, :-1] + vp[:, 1:])
    mass = upwind(v_star, rp[:, :-1], rp[:, 1:]) * v_star
    theta, _ = outflow_limiter(mass, np.zeros((2, rho.shape[1])), rho, grid, dt, boundary)
    v_up = upwind(v_star, vp[:, :-1], vp[:, 1:])
    velocity_flux = 0.5 * (1.0 - lambda_) * v_up * v_up

    rho_new = np.maximum(rho - dt / grid.dx * np.diff(mass * theta, axis=1), 0.0)
    v_new = v - dt / grid.dx * np.diff(velocity_flux, axis=1)
    if source is not None:
        v_new = v_new + dt * np.asarray(source, dtype=float).reshape(1, -1)
    ensure_finite("debris density", rho_new)
    ensure_finite("debris velocity", v_new)
    return rho_new[0], v_new[0]


def discrete_debris_rhs(system: DiscreteDebris, water: Optional[WaterSampler], params: DebrisParams,
                        gap_min: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """
    Right-hand side of the car-following system.

    Parameters:
    system (DiscreteDebris): Ordered particle positions and velocities.
    water (tuple): ``(u(x), h(x))`` samplers, or None for no drag and no friction.
    params (DebrisParams): Interaction and relaxation parameters.
    gap_min (float): Smallest admissible spacing.

    Returns:
    tuple: ``(dx/dt, dv/dt)``. The leading particle has no follower term.
    """
    gaps = system.gaps(gap_min)
    x, v = system.x, system.v
    dv = np.zeros_like(v)
    if water is not None:
        u_of, h_of = water
        dv += (np.asarray(u_of(x), dtype=float) - v) / params.tau_d - friction_rate(h_of(x), params) * v
    strength = params.lambda_ * v[:-1] if params.interaction == "velocity" else params.interaction_speed
    dv[:-1] += strength * (v[1:] - v[:-1]) / gaps
    return v.copy(), dv


def density_from_spacing(system: DiscreteDebris, params: DebrisParams, gap_min: float = 0.0) -> np.ndarray:
    """Density sample ``rho0 ell / (x_{j+1} - x_j)`` attached to each particle but the last."""
    return params.rho0 * params.ell / system.gaps(gap_min)


def integrate_discrete_debris(system: DiscreteDebris, t_end: float, params: DebrisParams,
                              water: Optional[WaterSampler] = None, gap_min: float = 0.0,
                              rtol: float = 1e-8, atol: float = 1e-10) -> DiscreteDebris:
    n = system.x.size

    def rhs(_t, y):
        dxdt, dvdt = discrete_debris_rhs(DiscreteDebris(y[:n], y[n:], system.m), water, params, gap_min)
        return np.concatenate([dxdt, dvdt])

    solution = solve_ivp(rhs, (0.0, t_end), np.concatenate([system.x, system.v]), rtol=rtol, atol=atol)
    if not solution.success:
        raise NonPhysicalState(f"discrete debris integration failed: {solution.message}")
    final = solution.y[:, -1]
    result = DiscreteDebris(final[:n], final[n:], system.m)
    result.gaps(gap_min)
    logger.debug("discrete debris: %s particles, %s rhs evaluations", n, solution.nfev)
    return result


def debris_max_speed(state: DebrisState, eps_blend: float = 1e-12) -> float:
    vx, vy = state.velocity(eps_blend)
    return float(max(np.max(np.abs(vx)), np.max(np.abs(vy))))


class DebrisSolver(BaseSolver):
    name = "debris"

    def __init__(self, params: DebrisParams, grid: Grid2D, boundary: BoundarySpec = BoundarySpec()):
        super().__init__(params, grid)
        self.boundary = boundary

    def max_signal_speed(self, state: DebrisState) -> float:
        return debris_max_speed(state, self.params.eps_blend)

    def step(self, state: DebrisState, dt: float, h: Optional[np.ndarray] = None,
             u: Optional[np.ndarray] = None, v: Optional[np.ndarray] = None, **kwargs) -> DebrisState:
        """Transport, then relax toward the water velocity when a water state is given"""
        state = debris_convective_step(state, self.grid, dt, self.boundary, self.params.eps_blend)
        if h is None:
            return state
        return apply_debris_source(state, u, v, h, dt, self.params)

    def check_state(self, state: DebrisState) -> None:
        ensure_finite("debris density", state.rho)
        if np.any(state.rho < 0.0):
            raise NonPhysicalState("negative debris density", index=int(np.flatnonzero(state.rho < 0.0)[0]))
        vx, vy = state.velocity(self.params.eps_blend)
        ensure_finite("debris velocity", vx)
        ensure_finite("debris velocity", vy)

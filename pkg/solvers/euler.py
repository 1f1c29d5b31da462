"""One-dimensional compressible Euler solver built on the Lagrange-flux scheme.

Interface pressure and normal velocity come from a Lagrangian HLL contact
solve; the convected part of the flux is upwinded on the sign of that velocity.
MUSCL reconstruction acts on primitive variables (rho, u, p).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from solvers.base import BaseSolver, GasParams, LimiterParams
from src.core import (
    BoundaryKind,
    Grid2D,
    compute_dt_cfl,
    face_values,
    get_integrator,
    limited_slopes,
    pad_axis,
    upwind,
)
from src.errors import NonPhysicalState

logger = logging.getLogger(__name__)

GHOST_LAYERS = 2
SOD_LEFT = (1.0, 0.0, 1.0)
SOD_RIGHT = (0.125, 0.0, 0.1)


@dataclass
class EulerState:
    rho: np.ndarray
    mom: np.ndarray
    ene: np.ndarray

    @classmethod
    def from_primitive(cls, rho, u, p, params: GasParams) -> "EulerState":
        rho = np.asarray(rho, dtype=float)
        u = np.asarray(u, dtype=float)
        p = np.asarray(p, dtype=float)
        return cls(rho, rho * u, p / (params.gamma - 1.0) + 0.5 * rho * u * u)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "EulerState":
        return cls(array[0].copy(), array[1].copy(), array[2].copy())

    def to_array(self) -> np.ndarray:
        return np.stack([np.asarray(self.rho, dtype=float),
                         np.asarray(self.mom, dtype=float),
                         np.asarray(self.ene, dtype=float)])

    @property
    def velocity(self) -> np.ndarray:
        return np.asarray(self.mom) / np.asarray(self.rho)

    def primitives(self, params: GasParams):
        p, _ = eos_pressure(self, params)
        return np.asarray(self.rho, dtype=float), self.velocity, p


@dataclass(frozen=True)
class ContactValues:
    p_star: np.ndarray
    u_star: np.ndarray


def _first_bad(mask) -> int:
    return int(np.flatnonzero(np.atleast_1d(mask))[0])


def eos_pressure(state: EulerState, params: GasParams):
    """
    Perfect-gas pressure and sound speed.

    Parameters:
    state (EulerState): Conservative state, scalar or per cell.
    params (GasParams): Adiabatic exponent.

    Returns:
    tuple: ``(p, c)`` with ``p = (gamma-1)(rho E - mom^2/(2 rho))`` and ``c = sqrt(gamma p / rho)``.
    """
    rho = np.asarray(state.rho, dtype=float)
    if np.any(~(rho > 0.0)):
        raise NonPhysicalState("non-positive density", index=_first_bad(~(rho > 0.0)))
    mom = np.asarray(state.mom, dtype=float)
    p = (params.gamma - 1.0) * (np.asarray(state.ene, dtype=float) - 0.5 * mom * mom / rho)
    if np.any(~(p > 0.0)):
        raise NonPhysicalState("non-positive pressure", index=_first_bad(~(p > 0.0)))
    return p, np.sqrt(params.gamma * p / rho)


def hll_lagrange_contact(left: EulerState, right: EulerState, params: GasParams) -> ContactValues:
    p_l, c_l = eos_pressure(left, params)
    p_r, c_r = eos_pressure(right, params)
    rho_l = np.asarray(left.rho, dtype=float)
    rho_r = np.asarray(right.rho, dtype=float)
    u_l = np.asarray(left.mom, dtype=float) / rho_l
    u_r = np.asarray(right.mom, dtype=float) / rho_r

    c = np.maximum(c_l, c_r)
    rho_sum = rho_l + rho_r
    p_star = (rho_r * p_l + rho_l * p_r) / rho_sum - (rho_l * rho_r / rho_sum) * c * (u_r - u_l)
    u_star = (rho_l * u_l + rho_r * u_r) / rho_sum - (p_r - p_l) / (rho_sum * c)
    return ContactValues(p_star=p_star, u_star=u_star)


def euler_numerical_flux(left: EulerState, right: EulerState, params: GasParams) -> np.ndarray:
    """Flux ``U_A u_A + pi_A`` at faces whose reconstructed traces are ``left`` and ``right``."""
    contact = hll_lagrange_contact(left, right, params)
    u_star = contact.u_star
    flux = upwind(u_star, left.to_array(), right.to_array()) * u_star
    flux[1] = flux[1] + contact.p_star
    flux[2] = flux[2] + contact.p_star * u_star
    return flux


def _ghost_padded(array: np.ndarray, boundary: tuple[BoundaryKind, BoundaryKind]) -> np.ndarray:
    low, high = boundary
    return np.stack([
        pad_axis(array[0], 0, low, high, odd=False, layers=GHOST_LAYERS),
        pad_axis(array[1], 0, low, high, odd=True, layers=GHOST_LAYERS),
        pad_axis(array[2], 0, low, high, odd=False, layers=GHOST_LAYERS),
    ])


def euler_rhs(array: np.ndarray, grid: Grid2D, params: GasParams, limiter: LimiterParams,
              boundary: tuple[BoundaryKind, BoundaryKind] = ("outflow", "outflow"),
              first_order: bool = False) -> np.ndarray:
    """Semi-discrete rate ``dU/dt`` for a ``(3, n)`` array of conservative variables."""
    n = array.shape[1]
    padded = EulerState.from_array(_ghost_padded(array, boundary))
    try:
        primitive = np.stack(padded.primitives(params))
    except NonPhysicalState as e:
        # report the cell, not the position in the padded array
        cell = None if e.index is None else min(max(e.index - GHOST_LAYERS, 0), n - 1)
        raise NonPhysicalState(e.message, index=cell) from e

    slopes = np.zeros_like(primitive)
    if not first_order:
        slopes = limited_slopes(primitive, 1, limiter.beta, grid.dx)
        if boundary[0] != "periodic":
            slopes[:, :GHOST_LAYERS + 1] = 0.0
        if boundary[1] != "periodic":
            slopes[:, -(GHOST_LAYERS + 1):] = 0.0

    left, right = face_values(primitive, slopes, grid.dx, axis=1)
    faces = slice(GHOST_LAYERS - 1, GHOST_LAYERS + n)
    left_state = EulerState.from_primitive(*left[:, faces], params)
    right_state = EulerState.from_primitive(*right[:, faces], params)
    flux = euler_numerical_flux(left_state, right_state, params)
    return -(flux[:, 1:] - flux[:, :-1]) / grid.dx


def euler_max_speed(state: EulerState, params: GasParams) -> float:
    _, c = eos_pressure(state, params)
    return float(np.max(np.abs(state.velocity) + c))


def euler_step(state: EulerState, grid: Grid2D, params: GasParams, limiter: LimiterParams,
               cfl: float, dt: Optional[float] = None,
               boundary: tuple[BoundaryKind, BoundaryKind] = ("outflow", "outflow"),
               time_scheme: str = "heun", first_order: bool = False,
               dt_max: float = 1e-3) -> EulerState:
    """
    Advance the Euler state by one predictor/corrector Lagrange-flux step.

    Args:
    state (EulerState): Cell states.
    grid (Grid2D): One-dimensional grid (``ny = 1``).
    params (GasParams): Equation of state.
    limiter (LimiterParams): Sweby coefficient.
    cfl (float): Courant number, used when ``dt`` is not given.
    dt (float): Time step; computed from the CFL condition when None.
    boundary (tuple): Boundary kinds at the left and right ends.
    time_scheme (str): Registered time integrator, Heun by default.
    first_order (bool): Force zero slopes.

    Returns:
    EulerState: The advanced state.
    """
    if dt is None:
        dt = compute_dt_cfl(euler_max_speed(state, params), grid, cfl, dt_max)
    advance = get_integrator(time_scheme)

    def rhs(array):
        return euler_rhs(array, grid, params, limiter, boundary, first_order)

    new_state = EulerState.from_array(advance(state.to_array(), rhs, dt))
    try:
        eos_pressure(new_state, params)
    except NonPhysicalState as e:
        raise NonPhysicalState(f"{e.message} after step (CFL too large?)", index=e.index) from e
    return new_state


class EulerSolver(BaseSolver):
    name = "euler"

    def __init__(self, params: GasParams, grid: Grid2D, limiter: LimiterParams = LimiterParams(),
                 boundary: tuple[BoundaryKind, BoundaryKind] = ("outflow", "outflow"),
                 time_scheme: str = "heun"):
        super().__init__(params, grid)
        self.limiter = limiter
        self.boundary = boundary
        self.time_scheme = time_scheme

    def max_signal_speed(self, state: EulerState) -> float:
        return euler_max_speed(state, self.params)

    def step(self, state: EulerState, dt: float, **kwargs) -> EulerState:
        return euler_step(state, self.grid, self.params, self.limiter, cfl=1.0, dt=dt,
                          boundary=self.boundary, time_scheme=self.time_scheme, **kwargs)

    def check_state(self, state: EulerState) -> None:
        eos_pressure(state, self.params)


@dataclass
class ShockTubeResult:
    x: np.ndarray
    state: EulerState
    steps: int
    t: float


def shock_tube_initial(grid: Grid2D, params: GasParams, left=SOD_LEFT, right=SOD_RIGHT,
                       x_split: float = 0.5) -> EulerState:
    x, _ = grid.cell_centers()
    is_left = x < x_split
    rho = np.where(is_left, left[0], right[0])
    u = np.where(is_left, left[1], right[1])
    p = np.where(is_left, left[2], right[2])
    return EulerState.from_primitive(rho, u, p, params)


def run_shock_tube(n_cells: int = 384, t_end: float = 0.23, cfl: float = 0.25, beta: float = 1.5,
                   gamma: float = 1.4, left=SOD_LEFT, right=SOD_RIGHT, x_split: float = 0.5,
                   first_order: bool = False, time_scheme: str = "heun") -> ShockTubeResult:
    """Run a Riemann problem on [0, 1] with transmissive ends up to ``t_end``."""
    grid = Grid2D(nx=n_cells, ny=1)
    params = GasParams(gamma=gamma)
    limiter = LimiterParams(beta=beta)
    solver = EulerSolver(params, grid, limiter, time_scheme=time_scheme)
    state = shock_tube_initial(grid, params, left, right, x_split)

    t = 0.0
    steps = 0
    while t < t_end:
        dt = min(solver.stable_dt(state, cfl), t_end - t)
        state = solver.step(state, dt, first_order=first_order)
        t += dt
        steps += 1
    logger.info("shock tube: %s cells, %s steps, t=%s", n_cells, steps, t)
    x, _ = grid.cell_centers()
    return ShockTubeResult(x=x, state=state, steps=steps, t=t)

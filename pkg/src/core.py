"""Structured grids, ghost cells, slope limiting, CFL control and time drivers.

Everything here is a pure function of its arguments; fields are numpy arrays of
shape ``(ny, nx)`` stored row-major, so the flat index of cell ``(j, i)`` is
``j * nx + i``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import DimensionMismatch, NonFiniteState

logger = logging.getLogger(__name__)

Axis = Literal["x", "y"]
BoundaryKind = Literal["wall", "outflow", "periodic"]
State = TypeVar("State")


class Grid2D(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    nx: int = Field(default=100, ge=1)
    ny: int = Field(default=1, ge=1)
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0

    @model_validator(mode="after")
    def check_bounds(self) -> "Grid2D":
        if not self.x1 > self.x0:
            raise ValueError("x1 must be greater than x0")
        if not self.y1 > self.y0:
            raise ValueError("y1 must be greater than y0")
        return self

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def dy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def min_spacing(self) -> float:
        """Smallest cell size over the axes that are actually resolved"""
        spacings = [s for s, n in ((self.dx, self.nx), (self.dy, self.ny)) if n > 1]
        return min(spacings) if spacings else min(self.dx, self.dy)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xc = self.x0 + (np.arange(self.nx) + 0.5) * self.dx
        yc = self.y0 + (np.arange(self.ny) + 0.5) * self.dy
        return xc, yc

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        xc, yc = self.cell_centers()
        return np.meshgrid(xc, yc)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


class LimiterParams(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    beta: float = Field(default=1.5, ge=1.0, le=2.0)


class BoundarySpec(BaseModel):
    """Ghost-cell treatment per domain edge"""

    model_config = ConfigDict(extra="forbid")

    left: BoundaryKind = "wall"
    right: BoundaryKind = "wall"
    bottom: BoundaryKind = "wall"
    top: BoundaryKind = "wall"

    @model_validator(mode="after")
    def check_periodic_pairs(self) -> "BoundarySpec":
        if (self.left == "periodic") != (self.right == "periodic"):
            raise ValueError("left and right must both be periodic or neither")
        if (self.bottom == "periodic") != (self.top == "periodic"):
            raise ValueError("bottom and top must both be periodic or neither")
        return self

    @property
    def x_periodic(self) -> bool:
        return self.left == "periodic"

    @property
    def y_periodic(self) -> bool:
        return self.bottom == "periodic"


@dataclass
class CellField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.size:
            raise DimensionMismatch(
                f"field has {values.size} values, grid has {self.grid.nx}x{self.grid.ny} cells"
            )
        self.values = values.reshape(self.grid.shape)
        ensure_finite("cell field", self.values)

    def flat(self) -> np.ndarray:
        return self.values.ravel()


def ensure_finite(name: str, values: np.ndarray) -> None:
    values = np.asarray(values)
    bad = ~np.isfinite(values)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise NonFiniteState(f"non-finite value in {name}", index=index)


def pad_axis(values: np.ndarray, axis: int, low: BoundaryKind, high: BoundaryKind,
             odd: bool = False, layers: int = 1) -> np.ndarray:
    """
    Add ghost layers on both ends of one axis.

    Parameters:
    values (numpy.ndarray): Cell values.
    axis (int): Axis to pad.
    low, high (str): Boundary kind at the low and high end of the axis.
    odd (bool): Negate wall ghosts (normal momentum components).
    layers (int): Number of ghost layers.

    Returns:
    numpy.ndarray: The padded array, ``2 * layers`` longer along ``axis``.
    """
    values = np.asarray(values, dtype=float)
    if low == "periodic":
        width = [(0, 0)] * values.ndim
        width[axis] = (layers, layers)
        return np.pad(values, width, mode="wrap")

    out = values
    for side, kind in ((0, low), (1, high)):
        width = [(0, 0)] * values.ndim
        width[axis] = (layers, 0) if side == 0 else (0, layers)
        out = np.pad(out, width, mode="symmetric" if kind == "wall" else "edge")
        if kind == "wall" and odd:
            ghost = [slice(None)] * values.ndim
            ghost[axis] = slice(0, layers) if side == 0 else slice(-layers, None)
            out[tuple(ghost)] *= -1.0
    return out


def pad_ghost(values: np.ndarray, boundary: BoundarySpec, *, odd_x: bool = False,
              odd_y: bool = False, layers: int = 1) -> np.ndarray:
    out = pad_axis(values, 1, boundary.left, boundary.right, odd_x, layers)
    return pad_axis(out, 0, boundary.bottom, boundary.top, odd_y, layers)


def sweby_limiter(a, b, beta: float):
    """Sweby limiter phi(a, b); zero unless both slopes share a sign."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    abs_a = np.abs(a)
    abs_b = np.abs(b)
    phi = np.sign(a) * np.maximum(np.minimum(abs_a, beta * abs_b), np.minimum(beta * abs_a, abs_b))
    return np.where(a * b > 0.0, phi, 0.0)


def limited_slopes(values: np.ndarray, axis: int, beta: float, spacing: float) -> np.ndarray:
    """Limited slope per cell along ``axis``; first and last cell get zero."""
    values = np.asarray(values, dtype=float)
    slopes = np.zeros_like(values)
    if values.shape[axis] < 3:
        return slopes
    moved = np.moveaxis(values, axis, -1)
    diff = np.diff(moved, axis=-1)
    out = np.moveaxis(slopes, axis, -1)
    out[..., 1:-1] = sweby_limiter(diff[..., 1:], diff[..., :-1], beta) / spacing
    return slopes


def muscl_reconstruct(field: CellField, axis: Axis, params: LimiterParams) -> np.ndarray:
    if axis == "x":
        return limited_slopes(field.values, 1, params.beta, field.grid.dx)
    return limited_slopes(field.values, 0, params.beta, field.grid.dy)


def face_values(values: np.ndarray, slopes: np.ndarray, spacing: float, axis: int = -1):
    """Left and right traces at every interior face along ``axis``."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    s = np.moveaxis(np.asarray(slopes, dtype=float), axis, -1)
    left = v[..., :-1] + 0.5 * spacing * s[..., :-1]
    right = v[..., 1:] - 0.5 * spacing * s[..., 1:]
    return np.moveaxis(left, -1, axis), np.moveaxis(right, -1, axis)


def upwind(u_star: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    return np.where(u_star >= 0.0, left, right)


def flux_divergence(flux_x: np.ndarray, flux_y: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Rate of change ``-(1/|K|) sum |A| F.n`` from x-face and y-face fluxes."""
    return -(flux_x[:, 1:] - flux_x[:, :-1]) / grid.dx - (flux_y[1:, :] - flux_y[:-1, :]) / grid.dy


def outflow_limiter(flux_x: np.ndarray, flux_y: np.ndarray, amount: np.ndarray,
                    grid: Grid2D, dt: float, boundary: BoundarySpec):
    """
    Scale factors that keep every cell's outgoing flux within its content.

    Each face flux leaves exactly one donor cell, so scaling it by the donor's
    factor keeps ``amount`` non-negative after a forward-Euler step of size
    ``dt`` while leaving the discrete flux single-valued (conservative).

    Returns:
    tuple: Factors for x faces ``(ny, nx+1)`` and y faces ``(ny+1, nx)``.
    """
    outgoing = grid.dy * (np.maximum(flux_x[:, 1:], 0.0) + np.maximum(-flux_x[:, :-1], 0.0))
    outgoing = outgoing + grid.dx * (np.maximum(flux_y[1:, :], 0.0) + np.maximum(-flux_y[:-1, :], 0.0))
    available = np.maximum(amount, 0.0) * grid.cell_area / dt
    theta = np.ones_like(amount, dtype=float)
    limited = outgoing > available
    theta[limited] = available[limited] / outgoing[limited]

    padded = pad_ghost(theta, boundary)
    theta_x = np.where(flux_x > 0.0, padded[1:-1, :-1], padded[1:-1, 1:])
    theta_y = np.where(flux_y > 0.0, padded[:-1, 1:-1], padded[1:, 1:-1])
    return theta_x, theta_y


def compute_dt_cfl(max_signal_speed: float, grid: Grid2D, cfl: float, dt_max: float = 1e-3) -> float:
    """
    Explicit time step from the CFL condition.

    Parameters:
    max_signal_speed (float): Largest wave speed over the grid.
    grid (Grid2D): The grid.
    cfl (float): Courant number in (0, 1].
    dt_max (float): Step used when nothing moves.

    Returns:
    float: ``cfl * min(dx, dy) / max_signal_speed``, or ``dt_max`` for a quiescent state.
    An axis with a single cell is not resolved and does not enter the minimum,
    so a one-dimensional run is limited by ``dx`` alone whatever its ``dy``.
    """
    speed = float(max_signal_speed)
    if not math.isfinite(speed):
        raise NonFiniteState(f"signal speed is not finite ({speed})")
    if speed < 0.0:
        raise ValueError(f"signal speed must be non-negative, got {speed}")
    if not 0.0 < cfl <= 1.0:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    if speed == 0.0:
        return dt_max
    return cfl * grid.min_spacing / speed


def heun_advance(state: State, rhs: Callable[[State], State], dt: float) -> State:
    k1 = rhs(state)
    predicted = state + dt * k1
    k2 = rhs(predicted)
    return state + dt * 0.5 * (k1 + k2)


def midpoint_advance(state: State, rhs: Callable[[State], State], dt: float) -> State:
    half = state + 0.5 * dt * rhs(state)
    return state + dt * rhs(half)


def euler_advance(state: State, rhs: Callable[[State], State], dt: float) -> State:
    return state + dt * rhs(state)


TIME_INTEGRATORS = {
    "heun": heun_advance,
    "midpoint": midpoint_advance,
    "euler": euler_advance,
}


def get_integrator(name: str) -> Callable:
    try:
        return TIME_INTEGRATORS[name]
    except KeyError:
        raise ValueError(f"Unknown time scheme: {name}") from None

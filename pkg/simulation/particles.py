"""Debris trajectories traced by passive particles."""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.ndimage import map_coordinates

from src.core import Grid2D

logger = logging.getLogger(__name__)

ParticleIntegrator = Literal["euler", "heun"]


@dataclass
class ParticleSet:
    positions: np.ndarray
    active: np.ndarray

    @classmethod
    def from_points(cls, points) -> "ParticleSet":
        positions = np.array(points, dtype=float).reshape(-1, 2)
        return cls(positions, np.ones(len(positions), dtype=bool))

    @classmethod
    def empty(cls) -> "ParticleSet":
        return cls(np.zeros((0, 2)), np.zeros(0, dtype=bool))

    def __len__(self) -> int:
        return len(self.positions)

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.positions.copy(), self.active.copy())

    def centroid(self) -> np.ndarray:
        return self.positions[self.active].mean(axis=0)


def seed_particles(rho: np.ndarray, grid: Grid2D, count: int, seed: int = 0) -> ParticleSet:
    """Draw ``count`` particles with cell probability proportional to ``rho |K|``, uniform inside the cell"""
    weights = np.maximum(np.asarray(rho, dtype=float), 0.0).ravel()
    total = weights.sum()
    if count == 0 or total <= 0.0:
        return ParticleSet.empty()
    rng = np.random.default_rng(seed)
    cells = rng.choice(weights.size, size=count, p=weights / total)
    row, col = np.divmod(cells, grid.nx)
    x = grid.x0 + (col + rng.uniform(size=count)) * grid.dx
    y = grid.y0 + (row + rng.uniform(size=count)) * grid.dy
    logger.debug("seeded %s particles", count)
    return ParticleSet.from_points(np.column_stack([x, y]))


def sample_velocity(v_field: tuple[np.ndarray, np.ndarray], points: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Bilinear interpolation of cell-centered velocity at arbitrary points"""
    coords = np.vstack([
        (points[:, 1] - grid.y0) / grid.dy - 0.5,
        (points[:, 0] - grid.x0) / grid.dx - 0.5,
    ])
    vx = map_coordinates(np.asarray(v_field[0], dtype=float), coords, order=1, mode="nearest")
    vy = map_coordinates(np.asarray(v_field[1], dtype=float), coords, order=1, mode="nearest")
    return np.column_stack([vx, vy])


def _inside(points: np.ndarray, grid: Grid2D) -> np.ndarray:
    return (
        (points[:, 0] >= grid.x0) & (points[:, 0] <= grid.x1)
        & (points[:, 1] >= grid.y0) & (points[:, 1] <= grid.y1)
    )


def particle_advect(particles: ParticleSet, v_field: tuple[np.ndarray, np.ndarray], dt: float, grid: Grid2D,
                    integrator: ParticleIntegrator = "euler") -> ParticleSet:
    """
    Move active particles with the velocity field frozen over the step.

    Parameters:
    particles (ParticleSet): Current positions.
    v_field (tuple): Cell-centered ``(vx, vy)``.
    dt (float): Time step.
    grid (Grid2D): Grid the field lives on.
    integrator (str): ``"euler"`` or ``"heun"``.

    Returns:
    ParticleSet: New positions; particles that leave the domain are deactivated.
    """
    if not particles.active.any():
        return particles.copy()
    positions = particles.positions.copy()
    active = particles.active.copy()
    start = positions[active]

    k1 = sample_velocity(v_field, start, grid)
    if integrator == "heun":
        k2 = sample_velocity(v_field, start + dt * k1, grid)
        moved = start + 0.5 * dt * (k1 + k2)
    elif integrator == "euler":
        moved = start + dt * k1
    else:
        raise ValueError(f"Unknown particle integrator: {integrator}")

    positions[active] = moved
    active[active] = _inside(moved, grid)
    return ParticleSet(positions, active)

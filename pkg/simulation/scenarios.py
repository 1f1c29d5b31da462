"""Initial states built from a ``SimConfig``, and the lake-at-rest check."""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from tqdm import tqdm

from solvers.debris import DebrisSolver, DebrisState
from solvers.solver_manager import SolverManager, solver_manager
from solvers.swe import DryVelocityField, SweSolver, SweState, Topography
from src.config import Hill, SimConfig, TopographySection
from src.core import BoundarySpec, Grid2D, compute_dt_cfl, ensure_finite
from src.errors import NonFiniteValue
from src.file_rw import read_topography_file

logger = logging.getLogger(__name__)


def evaluate_topography(topography: TopographySection, hills: Iterable[Hill], grid: Grid2D) -> np.ndarray:
    """``base + slope_x x + slope_y y`` plus one Gaussian ``height exp(-r^2/width^2)`` per hill"""
    x, y = grid.mesh()
    z = topography.base + topography.slope_x * x + topography.slope_y * y
    for hill in hills:
        r2 = (x - hill.x) ** 2 + (y - hill.y) ** 2
        z = z + hill.height * np.exp(-r2 / hill.width ** 2)
    return z


def load_topography(topography: TopographySection, grid: Grid2D, hills: Iterable[Hill] = (),
                    boundary: BoundarySpec = BoundarySpec()) -> Topography:
    """
    Cell-centered bed elevation plus face means, from the analytic description or a gridded file.

    Args:
    topography (TopographySection): Analytic coefficients or the file to read.
    grid (Grid2D): Target grid; a file must match it exactly.
    hills (iterable of Hill): Gaussian bumps added to the analytic bed.
    boundary (BoundarySpec): Ghost treatment for the boundary face values.

    Returns:
    Topography: ``z`` and its face values ``(z_j + z_{j+1})/2``.
    """
    if topography.kind == "file":
        z = read_topography_file(topography.file, grid)
    else:
        z = evaluate_topography(topography, hills, grid)
    bad = ~np.isfinite(z)
    if bad.any():
        raise NonFiniteValue("non-finite topography value", index=int(np.flatnonzero(bad)[0]))
    return Topography.from_cells(z, boundary)


def initial_water(config: SimConfig, z: np.ndarray) -> SweState:
    """Still water at ``still_level`` with each wave region raised by its elevation"""
    x, y = config.grid.mesh()
    level = np.full(config.grid.shape, config.water.still_level)
    for wave in config.waves:
        level = np.where(wave.contains(x, y), config.water.still_level + wave.elevation, level)
    return _water_at_level(z, level)


def _water_at_level(z: np.ndarray, level: np.ndarray) -> SweState:
    h = np.maximum(level - z, 0.0)
    return SweState(h, np.zeros_like(h), np.zeros_like(h))


def initial_debris(config: SimConfig) -> DebrisState:
    grid = config.grid
    if not config.debris.enabled:
        return DebrisState.empty(grid)
    x, y = grid.mesh()
    rho = grid.zeros()
    for region in config.debris_regions:
        rho = np.where(region.contains(x, y), region.density, rho)
    ensure_finite("debris density", rho)
    return DebrisState.from_velocity(rho, grid.zeros(), grid.zeros())


@dataclass
class RunSetup:
    config: SimConfig
    grid: Grid2D
    topography: Topography
    swe: SweSolver
    debris: DebrisSolver

    @property
    def z(self) -> np.ndarray:
        return self.topography.z


def build_setup(config: SimConfig, manager: Optional[SolverManager] = None) -> RunSetup:
    manager = manager or solver_manager
    grid = config.grid
    swe = manager.add_solver("swe", config.swe_params(), grid)
    debris = manager.add_solver("debris", config.debris.params(), grid, boundary=config.boundary)
    topography = load_topography(config.topography, grid, config.hills, config.boundary)
    logger.info("scenario %s: %sx%s cells on [%s, %s]x[%s, %s]", config.simulation.scenario,
                grid.nx, grid.ny, grid.x0, grid.x1, grid.y0, grid.y1)
    return RunSetup(config=config, grid=grid, topography=topography, swe=swe, debris=debris)


@dataclass
class LakeAtRestReport:
    steps: int
    level: float
    max_level_deviation: float
    max_momentum: float

    def passed(self, tolerance: float = 1e-12) -> bool:
        return self.max_level_deviation <= tolerance and self.max_momentum <= tolerance


def lake_at_rest_check(config: SimConfig, steps: int = 1000, progress: bool = False) -> LakeAtRestReport:
    """
    Run still water over the configured bed and measure how far it drifts.

    Waves and debris in the config are ignored; the level deviation is measured
    over the initially wet cells.
    """
    setup = build_setup(config)
    level = config.water.still_level
    z = setup.z
    state = SweState.lake_at_rest(z, level)
    wet = state.h > 0.0
    dry = DryVelocityField.at_rest(setup.grid)
    sim = config.simulation

    for _ in tqdm(range(steps), desc="lake at rest", disable=not progress):
        dt = compute_dt_cfl(setup.swe.max_signal_speed(state, dry), setup.grid, sim.cfl, sim.dt_max)
        result = setup.swe.step(state, dt, topography=setup.topography, dry=dry)
        state, dry = result.state, result.dry

    deviation = float(np.max(np.abs(state.h + z - level)[wet])) if wet.any() else 0.0
    momentum = float(max(np.max(np.abs(state.hu)), np.max(np.abs(state.hv))))
    logger.info("lake at rest after %s steps: level deviation %.3e, momentum %.3e", steps, deviation, momentum)
    return LakeAtRestReport(steps=steps, level=level, max_level_deviation=deviation, max_momentum=momentum)

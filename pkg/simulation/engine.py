"""Coupled water/debris time loop.

Each step advances the water on the (possibly debris-raised) bed, transports
the debris, relaxes it toward the new water velocity, accumulates damage and
moves the tracer particles. Frames are deep copies handed to a thread pool so
writing overlaps the following steps.
"""

import logging
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

from solvers.base import CouplingMode
from solvers.debris import DebrisState, debris_max_speed
from solvers.swe import DryVelocityField, SweState, Topography, energy_diagnostic, swe_max_speed
from src.config import SimConfig, sim_threads
from src.core import compute_dt_cfl
from src.errors import IoError, SimulationError
from src.file_rw import OutputFrame, write_frame_csv, write_frame_vtk, write_to_json

from .damage import DamageField, damage_accumulate
from .particles import ParticleSet, particle_advect, seed_particles
from .scenarios import RunSetup, build_setup, initial_debris, initial_water

logger = logging.getLogger(__name__)


@dataclass
class SimulationState:
    water: SweState
    debris: DebrisState
    dryfields: DryVelocityField
    damage: DamageField
    particles: ParticleSet
    t: float = 0.0
    step: int = 0

    def snapshot(self) -> "SimulationState":
        return SimulationState(
            water=self.water.copy(),
            debris=self.debris.copy(),
            dryfields=self.dryfields.copy(),
            damage=self.damage.copy(),
            particles=self.particles.copy(),
            t=self.t,
            step=self.step,
        )


@dataclass
class SimulationResult:
    state: SimulationState
    frames: List[OutputFrame] = field(default_factory=list)
    manifest: Optional[Path] = None


def initial_state(setup: RunSetup) -> SimulationState:
    config = setup.config
    debris = initial_debris(config)
    return SimulationState(
        water=initial_water(config, setup.z),
        debris=debris,
        dryfields=DryVelocityField.at_rest(setup.grid),
        damage=DamageField.zeros(setup.grid, vector=config.damage.vector, rho=debris.rho),
        particles=seed_particles(debris.rho, setup.grid, config.particles.count, config.particles.seed),
    )


def effective_topography(rho: np.ndarray, mode: CouplingMode, setup: RunSetup) -> Topography:
    """Bed ``z + mu rho`` in two-way mode, the plain bed otherwise"""
    if mode.kind == "two_way":
        return Topography.from_cells(setup.z + mode.mu_debris * rho, setup.config.boundary)
    return setup.topography


def select_dt(state: SimulationState, setup: RunSetup) -> float:
    """One CFL step for water, dry velocity and debris together"""
    sim = setup.config.simulation
    speed = swe_max_speed(state.water, state.dryfields, setup.swe.params, setup.grid)
    if setup.config.debris.enabled:
        speed = max(speed, debris_max_speed(state.debris, setup.debris.params.eps_blend))
    return compute_dt_cfl(speed, setup.grid, sim.cfl, sim.dt_max)


def coupled_step(state: SimulationState, mode: CouplingMode, setup: RunSetup,
                 dt: Optional[float] = None) -> SimulationState:
    """
    Advance the coupled system by one step.

    Args:
    state (SimulationState): State at t^n.
    mode (CouplingMode): One-way or two-way coupling.
    setup (RunSetup): Grid, bed and solvers.
    dt (float): Time step; the shared CFL step when None.

    Returns:
    SimulationState: State at t^n + dt.
    """
    if dt is None:
        dt = select_dt(state, setup)
    config = setup.config
    eps = setup.debris.params.eps_blend
    try:
        bed = effective_topography(state.debris.rho, mode, setup)
        water = setup.swe.step(state.water, dt, topography=bed, dry=state.dryfields)

        debris = state.debris
        if config.debris.enabled:
            debris = setup.debris.step(debris, dt, h=water.state.h, u=water.u, v=water.v)

        damage = damage_accumulate(state.damage, state.debris, dt, eps)
        damage.rho_d_max = np.maximum(damage.rho_d_max, debris.rho)
        particles = state.particles
        if len(particles):
            particles = particle_advect(particles, debris.velocity(eps), dt, setup.grid,
                                        config.particles.integrator)
    except SimulationError as e:
        e.add_context(step=state.step + 1, t=state.t)
        raise

    return SimulationState(
        water=water.state,
        debris=debris,
        dryfields=water.dry,
        damage=damage,
        particles=particles,
        t=state.t + dt,
        step=state.step + 1,
    )


def make_frame(state: SimulationState, setup: RunSetup) -> OutputFrame:
    vdx, vdy = state.debris.velocity(setup.debris.params.eps_blend)
    return OutputFrame(
        t=state.t,
        step=state.step,
        grid=setup.grid,
        h=state.water.h.copy(),
        hu=state.water.hu.copy(),
        hv=state.water.hv.copy(),
        z=setup.z.copy(),
        rho_d=state.debris.rho.copy(),
        vdx=vdx,
        vdy=vdy,
        D=state.damage.D.copy(),
    )


def diagnostics(state: SimulationState, setup: RunSetup) -> Dict[str, float]:
    energy, _ = energy_diagnostic(state.water, setup.topography, setup.swe.params.gravity, setup.grid)
    return {
        "t": state.t,
        "step": state.step,
        "water_volume": setup.swe.total_volume(state.water),
        "debris_mass": state.debris.mass(setup.grid),
        "energy": energy,
        "max_damage": state.damage.peak,
        "max_debris_density": float(np.max(state.damage.rho_d_max)),
    }


def write_frame(frame: OutputFrame, directory: Path, formats) -> List[str]:
    files = []
    stem = f"frame_{frame.step:05d}"
    if "csv" in formats:
        write_frame_csv(frame, directory / f"{stem}.csv")
        files.append(f"{stem}.csv")
    if "vtk" in formats:
        write_frame_vtk(frame, directory / f"{stem}.vtk")
        files.append(f"{stem}.vtk")
    return files


class FrameWriter:
    """Writes frames on a worker pool and records them for the manifest"""

    def __init__(self, directory: Optional[Path], formats, threads: int):
        self.directory = directory
        self.formats = list(formats)
        self.entries: List[Dict] = []
        self.futures: List[Future] = []
        self.pool = ThreadPoolExecutor(max_workers=threads) if directory is not None else None
        if directory is not None:
            try:
                directory.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                self.pool.shutdown()
                raise IoError(f"cannot create output directory: {e}", path=str(directory)) from e

    def submit(self, frame: OutputFrame, energy: float) -> None:
        self.entries.append({"step": frame.step, "t": frame.t, "energy": energy})
        if self.pool is not None:
            self.futures.append(self.pool.submit(write_frame, frame, self.directory, self.formats))

    def close(self, final: Dict, status: str) -> Optional[Path]:
        """Wait for pending writes and write the manifest; the first write error is raised"""
        if self.pool is None:
            return None
        error = None
        for entry, future in zip(self.entries, self.futures):
            try:
                entry["files"] = future.result()
            except Exception as e:
                entry["files"] = []
                error = error or e
        self.pool.shutdown()
        manifest = self.directory / "manifest.json"
        write_to_json(manifest, {"status": status, "frames": self.entries, "final": final})
        if error is not None:
            raise error
        return manifest


def _close_failed(writer: FrameWriter, state: SimulationState, setup: RunSetup) -> None:
    # the error that stopped the run is the one the caller sees
    try:
        writer.close(diagnostics(state, setup), status="failed")
    except Exception as e:
        logger.error("could not finish the output of the failed run: %s", e)


def run_simulation(config: SimConfig, output_dir: Optional[Path] = None, cadence: Optional[int] = None,
                   progress: bool = True, keep_frames: bool = True) -> SimulationResult:
    """
    Run the coupled simulation from t = 0 to ``t_end``.

    A frame is emitted at t = 0, every ``cadence`` steps and at the end. With an
    output directory the frames are written in the configured formats together
    with ``manifest.json``; on failure the frames already emitted are still
    written and the manifest is marked as failed.
    """
    setup = build_setup(config)
    state = initial_state(setup)
    sim = config.simulation
    cadence = cadence or config.output.cadence
    writer = FrameWriter(Path(output_dir) if output_dir is not None else None,
                         config.output.formats, sim_threads())
    result = SimulationResult(state=state)

    def emit(current: SimulationState) -> None:
        frame = make_frame(current, setup)
        energy, _ = energy_diagnostic(current.water, setup.topography, sim.gravity, setup.grid)
        writer.submit(frame, energy)
        if keep_frames:
            result.frames.append(frame)
        logger.debug("frame at step %s, t=%s", current.step, current.t)

    logger.info("running %s until t=%s", sim.scenario, sim.t_end)
    finished = False
    try:
        emit(state)
        with tqdm(total=sim.t_end, desc=sim.scenario, unit="s", disable=not progress) as bar:
            while state.t < sim.t_end and state.step < sim.max_steps:
                dt = min(select_dt(state, setup), sim.t_end - state.t)
                state = coupled_step(state, config.coupling, setup, dt)
                bar.update(dt)
                if state.step % cadence == 0:
                    emit(state)
        if writer.entries[-1]["step"] != state.step:
            emit(state)
        finished = True
    except SimulationError as e:
        logger.error("run aborted: %s", e)
        raise
    finally:
        if not finished:
            _close_failed(writer, state, setup)

    if state.step >= sim.max_steps and state.t < sim.t_end:
        logger.warning("stopped after max_steps=%s at t=%s", sim.max_steps, state.t)
    final = diagnostics(state, setup)
    result.manifest = writer.close(final, status="complete")
    result.state = state
    logger.info("finished: %s steps, water volume %.12g, debris mass %.12g, max damage %.6g",
                state.step, final["water_volume"], final["debris_mass"], final["max_damage"])
    return result

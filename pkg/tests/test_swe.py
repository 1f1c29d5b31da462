import math

import numpy as np
import pytest

from solvers.base import SweParams
from solvers.swe import (
    DryVelocityField,
    SweSolver,
    SweState,
    Topography,
    blend_velocity,
    blend_weight,
    desingularize_momentum,
    dry_velocity_advance,
    energy_diagnostic,
    sigma_subcharacteristic,
    swe_max_speed,
    swe_riemann_dry,
    swe_riemann_wet,
    swe_step,
    thin_layer_sigma,
    well_balanced_momentum_update,
)
from src.core import BoundarySpec, Grid2D, compute_dt_cfl
from src.errors import DegenerateRiemann
from tests.conftest import gaussian_bump

G = 9.81


def test_sigma_subcharacteristic():
    assert sigma_subcharacteristic(1.0, 0.0, 4.0, 0.0, G) == pytest.approx(math.sqrt(4.0 * G))
    assert sigma_subcharacteristic(0.0, 30.0, 0.0, -30.0, G) == pytest.approx(60.0)
    assert sigma_subcharacteristic(0.0, 0.0, 0.0, 0.0, G, sigma_floor=1e-8) == 1e-8


def test_wet_riemann_dam_break_interface():
    sigma = math.sqrt(G * 2.0)
    result = swe_riemann_wet(2.0, 0.0, 0.0, 1.0, 0.0, 0.0, G, sigma)
    assert result.u_star == pytest.approx(G / (2.0 * sigma), rel=1e-14)
    assert result.u_star == pytest.approx(1.1074, abs=1e-4)
    assert result.h_star == pytest.approx(1.5)
    assert result.p_star == pytest.approx(0.5 * G * 1.5 ** 2)


def test_wet_riemann_lake_at_rest_interface():
    sigma = math.sqrt(G * 2.0)
    result = swe_riemann_wet(2.0, 0.0, 0.0, 1.0, 0.0, 1.0, G, sigma)
    assert result.u_star == 0.0
    assert result.h_star == pytest.approx(1.5)
    assert result.z_star == 0.5


def test_wet_riemann_rejects_strong_compression():
    with pytest.raises(DegenerateRiemann) as info:
        swe_riemann_wet(np.array([1.0, 1.0]), np.array([0.0, 5.0]), np.zeros(2),
                        np.array([1.0, 1.0]), np.array([0.0, -5.0]), np.zeros(2), G, np.array([3.0, 1.0]))
    assert info.value.index == 1


def test_dry_riemann():
    assert swe_riemann_dry(0.0, 0.0, 0.0, 1.0, G, 3.0) == pytest.approx(-G / 6.0)
    assert swe_riemann_dry(1.0, 0.5, 3.0, 0.5, G, 2.0) == pytest.approx(2.0)


def test_unit_depth_wet_solver_matches_dry_formula():
    rng = np.random.default_rng(5)
    u_l, u_r = rng.normal(size=20), rng.normal(size=20)
    z_l, z_r = rng.uniform(size=20), rng.uniform(size=20)
    sigma = 10.0
    wet = swe_riemann_wet(np.ones(20), u_l, z_l, np.ones(20), u_r, z_r, G, sigma)
    np.testing.assert_allclose(wet.u_star, swe_riemann_dry(u_l, z_l, u_r, z_r, G, sigma), rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("w,eps", [(3.0, 1e-12), (-0.7, 1e-3), (123.456, 1.0), (1e-9, 1e-30)])
def test_blend_returns_dry_velocity_in_dry_cells(w, eps):
    assert blend_velocity(0.0, 0.0, w, eps) == w


def test_blend_values():
    assert blend_velocity(1e-6, 0.0, 3.0, 1e-6) == pytest.approx(2.999997, rel=1e-9)
    assert blend_velocity(1.0, 2.0, 0.0, 1e-12) == pytest.approx(2.0, rel=1e-11)
    assert blend_velocity(0.5, 1.0, 7.0, 1e-14) == pytest.approx(2.0, rel=1e-12)


def test_adaptive_blend_weight():
    params = SweParams.for_depth(1.0, wetdry={"eps_mode": "adaptive", "eps_blend": 1e-12})
    grid = Grid2D(nx=10, ny=20)
    assert blend_weight(params.wetdry, grid) == pytest.approx(0.05 ** 4)
    assert blend_weight(SweParams().wetdry, grid) == 1e-12


def test_thin_layer_momentum_is_desingularized():
    h = np.array([0.0, 2.5e-4, 5e-4, 1e-3, 0.2])
    hu = np.array([0.0, 1e-4, 1e-4, 1e-3, 0.5])
    out = desingularize_momentum(h, hu, 1e-3)
    assert out[0] == 0.0
    assert out[1] / h[1] == pytest.approx(math.sqrt(2.0 / 257.0) * hu[1] / h[1], rel=1e-12)
    assert out[2] / h[2] == pytest.approx(math.sqrt(2.0 / 17.0) * hu[2] / h[2], rel=1e-12)
    # untouched from h_thin upward
    np.testing.assert_array_equal(out[3:], hu[3:])
    np.testing.assert_allclose(desingularize_momentum(1e-3 * (1 - 1e-12), 1e-3, 1e-3), 1e-3, rtol=1e-9)


def test_thin_layer_sigma_floor():
    params = SweParams.for_depth(0.4)
    h_thin = params.wetdry.h_thin
    assert thin_layer_sigma(0.0, 0.0, params) == pytest.approx(params.dry_sigma)
    assert thin_layer_sigma(0.5 * h_thin, 0.5 * h_thin, params) == pytest.approx(0.5 * params.dry_sigma)
    np.testing.assert_array_equal(thin_layer_sigma(np.array([h_thin, 0.3]), np.array([h_thin, 0.0]), params),
                                  [0.0, 0.0])


def lake_1d(z):
    n = len(z)
    h = 1.0 - np.asarray(z)
    hl = np.concatenate([[h[0]], h])
    hr = np.concatenate([h, [h[-1]]])
    zl = np.concatenate([[z[0]], z])
    zr = np.concatenate([z, [z[-1]]])
    result = swe_riemann_wet(hl, np.zeros(n + 1), zl, hr, np.zeros(n + 1), zr, G, np.sqrt(G * np.maximum(hl, hr)))
    return h, result


def test_momentum_update_preserves_lake_at_rest():
    z = np.array([0.0, 0.2, 0.5, 0.1, 0.3])
    h, result = lake_1d(z)
    flux = np.zeros(len(z) + 1)
    momentum = well_balanced_momentum_update(np.zeros(len(z)), flux, result.h_star, result.z_star, G, 1e-3, 0.1)
    np.testing.assert_allclose(momentum, 0.0, atol=1e-14)


def test_momentum_update_on_flat_dam_break_is_pressure_difference():
    h = np.array([2.0, 2.0, 1.0, 1.0])
    hl = np.concatenate([[h[0]], h])
    hr = np.concatenate([h, [h[-1]]])
    zeros = np.zeros(5)
    result = swe_riemann_wet(hl, zeros, zeros, hr, zeros, zeros, G, np.sqrt(G * np.maximum(hl, hr)))
    dt, dx = 1e-3, 0.1
    momentum = well_balanced_momentum_update(np.zeros(4), np.zeros(5), result.h_star, result.z_star, G, dt, dx)
    np.testing.assert_allclose(momentum, -dt / dx * np.diff(result.p_star), rtol=1e-12, atol=1e-15)


def test_dry_velocity_slides_down_a_dry_slope():
    grid = Grid2D(nx=20, ny=1)
    slope = 0.3
    x, _ = grid.mesh()
    params = SweParams(boundary=BoundarySpec(left="outflow", right="outflow"))
    topography = Topography.from_cells(slope * x, params.boundary)
    dt = 1e-3
    result = dry_velocity_advance(DryVelocityField.at_rest(grid), None, topography, params, grid, dt)
    np.testing.assert_allclose(result.u_dry[0, 2:-2], -G * slope * dt, rtol=1e-10)
    np.testing.assert_allclose(result.eta[0, 2:-2], 1.0, rtol=1e-12)
    assert np.all(result.v_dry == 0.0)


def test_dry_velocity_relaxation():
    grid = Grid2D(nx=8, ny=4)
    params = SweParams(wetdry={"mu_relax": 1e-3})
    flat = Topography.from_cells(grid.zeros(), params.boundary)
    dt = 2e-3
    moving = DryVelocityField(np.ones(grid.shape), np.full(grid.shape, 0.3), grid.zeros())
    periodic = params.model_copy(update={"boundary": BoundarySpec(left="periodic", right="periodic")})
    unchanged = dry_velocity_advance(moving, (moving.u_dry, moving.v_dry), flat, periodic, grid, dt)
    np.testing.assert_allclose(unchanged.u_dry, 0.3, rtol=1e-14)

    target = (np.ones(grid.shape), grid.zeros())
    relaxed = dry_velocity_advance(DryVelocityField.at_rest(grid), target, flat, params, grid, dt)
    np.testing.assert_allclose(relaxed.u_dry, 1.0 - math.exp(-2.0), rtol=1e-12)


def run_lake(grid, z, steps, params):
    state = SweState.lake_at_rest(z, 1.0)
    topography = Topography.from_cells(z, params.boundary)
    dry = DryVelocityField.at_rest(grid)
    for _ in range(steps):
        dt = compute_dt_cfl(swe_max_speed(state, dry, params, grid), grid, params.cfl, params.dt_max)
        result = swe_step(state, topography, dry, params, grid, dt)
        state, dry = result.state, result.dry
    return state


@pytest.mark.slow
def test_lake_at_rest_over_gaussian_bump():
    grid = Grid2D(nx=100, ny=100)
    z = gaussian_bump(grid, height=0.5, width=0.1)
    state = run_lake(grid, z, 1000, SweParams())
    assert np.max(np.abs(state.h + z - 1.0)) <= 1e-12
    assert np.max(np.abs(state.hu)) <= 1e-12
    assert np.max(np.abs(state.hv)) <= 1e-12


@pytest.mark.parametrize("scheme", ["heun", "midpoint", "euler"])
def test_lake_at_rest_short_run_every_scheme(scheme):
    grid = Grid2D(nx=30, ny=20, x1=1.5)
    z = gaussian_bump(grid, height=0.7, width=0.2, center=(0.7, 0.5))
    state = run_lake(grid, z, 50, SweParams(time_scheme=scheme))
    assert np.max(np.abs(state.h + z - 1.0)) <= 1e-13
    assert np.max(np.abs(state.hu)) <= 1e-13


def beach_run(steps, n=400):
    grid = Grid2D(nx=n, ny=1)
    x, _ = grid.mesh()
    params = SweParams.for_depth(0.5, boundary=BoundarySpec())
    z = np.maximum(0.0, x - 0.3) * 0.5
    state = SweState(np.where(x < 0.2, 0.5, 0.0), grid.zeros(), grid.zeros())
    topography = Topography.from_cells(z, params.boundary)
    dry = DryVelocityField.at_rest(grid)
    fronts, minima = [], []
    for _ in range(steps):
        dt = compute_dt_cfl(swe_max_speed(state, dry, params, grid), grid, params.cfl, params.dt_max)
        result = swe_step(state, topography, dry, params, grid, dt)
        state, dry = result.state, result.dry
        minima.append(state.h.min())
        fronts.append(x[0, np.flatnonzero(state.h[0] > 1e-4).max()])
    return state, np.array(fronts), np.array(minima)


@pytest.mark.slow
def test_dam_break_onto_dry_beach_stays_positive():
    state, fronts, minima = beach_run(2000)
    assert np.all(minima >= 0.0)
    assert np.all(np.isfinite(state.h)) and np.all(np.isfinite(state.hu))
    # the front climbs the beach until it stalls and falls back
    peak = int(np.argmax(fronts))
    assert peak > 0
    assert np.all(np.diff(fronts[:peak + 1]) >= 0.0)
    assert fronts[peak] > 0.3


def test_wet_dry_step_conserves_volume_and_zeros_dry_momentum():
    grid = Grid2D(nx=24, ny=16)
    x, y = grid.mesh()
    params = SweParams.for_depth(0.5)
    z = 0.4 * np.exp(-((x - 0.6) ** 2 + (y - 0.5) ** 2) / 0.05)
    state = SweState(np.maximum(np.where(x < 0.3, 0.5, 0.1) - z, 0.0), grid.zeros(), grid.zeros())
    solver = SweSolver(params, grid)
    topography = solver.topography(z)
    dry = DryVelocityField.at_rest(grid)
    volume = solver.total_volume(state)
    for _ in range(200):
        dt = compute_dt_cfl(solver.max_signal_speed(state, dry), grid, params.cfl)
        result = solver.step(state, dt, topography=topography, dry=dry)
        state, dry = result.state, result.dry
        solver.check_state(state)
    assert solver.total_volume(state) == pytest.approx(volume, rel=1e-12)
    dry_cells = state.h < params.wetdry.h_wet
    assert np.all(state.hu[dry_cells] == 0.0) and np.all(state.hv[dry_cells] == 0.0)


def test_energy_diagnostic():
    grid = Grid2D(nx=2, ny=1)
    state = SweState(np.array([[2.0, 0.0]]), np.array([[2.0, 0.0]]), np.zeros((1, 2)))
    topography = Topography.from_cells(np.array([[0.5, 1.0]]), BoundarySpec())
    total, per_cell = energy_diagnostic(state, topography, G, grid)
    assert per_cell[0, 0] == pytest.approx(0.5 * 2.0 * 1.0 + 0.5 * G * 4.0)
    assert per_cell[0, 1] == 0.0
    assert total == pytest.approx(per_cell.sum() * grid.cell_area)
    with_bed, _ = energy_diagnostic(state, topography, G, grid, include_potential=True)
    assert with_bed == pytest.approx(total + G * 2.0 * 0.5 * grid.cell_area)


def test_topography_edges_are_face_means():
    grid = Grid2D(nx=5, ny=3)
    x, _ = grid.mesh()
    topography = Topography.from_cells(x, BoundarySpec())
    np.testing.assert_allclose(topography.z_edge_x[:, 1:-1], 0.5 * (x[:, 1:] + x[:, :-1]))
    np.testing.assert_array_equal(topography.z_edge_x[:, 0], x[:, 0])


def test_all_dry_slope_stays_dry_with_bounded_dry_velocity():
    grid = Grid2D(nx=20, ny=10)
    x, y = grid.mesh()
    params = SweParams.for_depth(0.5)
    tau = params.wetdry.tau_dry
    topography = Topography.from_cells(0.3 * x + 0.1 * y, params.boundary)
    state = SweState(grid.zeros(), grid.zeros(), grid.zeros())
    dry = DryVelocityField.at_rest(grid)
    for _ in range(500):
        dt = compute_dt_cfl(swe_max_speed(state, dry, params, grid), grid, params.cfl, params.dt_max)
        result = swe_step(state, topography, dry, params, grid, dt)
        state, dry = result.state, result.dry
    assert np.all(state.h == 0.0) and np.all(state.hu == 0.0) and np.all(state.hv == 0.0)
    assert np.all(np.isfinite(dry.u_dry)) and np.all(np.isfinite(dry.v_dry))
    # friction holds the dry velocity near its terminal value -g s tau
    assert np.max(np.abs(dry.u_dry)) <= 1.5 * G * 0.3 * tau
    assert np.max(np.abs(dry.v_dry)) <= 1.5 * G * 0.1 * tau
    assert np.median(dry.u_dry) == pytest.approx(-G * 0.3 * tau, rel=0.05)


def flat_dam_break(n, steps=None, t_end=None):
    grid = Grid2D(nx=n, ny=1)
    x, _ = grid.mesh()
    params = SweParams.for_depth(2.0)
    state = SweState(np.where(x < 0.5, 2.0, 1.0), grid.zeros(), grid.zeros())
    topography = Topography.from_cells(grid.zeros(), params.boundary)
    dry = DryVelocityField.at_rest(grid)
    if t_end is not None:
        dt = 0.04 * grid.dx
        steps = int(round(t_end / dt))
    energies = [energy_diagnostic(state, topography, G, grid)[0]]
    for _ in range(steps):
        if t_end is None:
            dt = compute_dt_cfl(swe_max_speed(state, dry, params, grid), grid, params.cfl, params.dt_max)
        result = swe_step(state, topography, dry, params, grid, dt)
        state, dry = result.state, result.dry
        energies.append(energy_diagnostic(state, topography, G, grid)[0])
    return state, np.array(energies)


def test_closed_dam_break_does_not_create_energy():
    _, energies = flat_dam_break(100, steps=300)
    assert np.all(energies[1:] <= energies[:-1] * (1.0 + 1e-8))
    assert energies[-1] < energies[0]


def test_dam_break_self_convergence():
    reference, _ = flat_dam_break(400, t_end=0.04)
    errors = []
    for n in (50, 100):
        state, _ = flat_dam_break(n, t_end=0.04)
        averaged = reference.h[0].reshape(n, -1).mean(axis=1)
        errors.append(np.sum(np.abs(state.h[0] - averaged)) / n)
    order = math.log2(errors[0] / errors[1])
    assert order >= 0.8


def test_radial_hump_keeps_its_square_symmetry():
    grid = Grid2D(nx=32, ny=32)
    x, y = grid.mesh()
    params = SweParams.for_depth(1.0)
    h = 1.0 + 0.3 * np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / 0.02)
    state = SweState(h, grid.zeros(), grid.zeros())
    topography = Topography.from_cells(grid.zeros(), params.boundary)
    dry = DryVelocityField.at_rest(grid)
    for _ in range(40):
        dt = compute_dt_cfl(swe_max_speed(state, dry, params, grid), grid, params.cfl, params.dt_max)
        result = swe_step(state, topography, dry, params, grid, dt)
        state, dry = result.state, result.dry
    assert np.max(np.abs(state.hu)) > 1e-3
    np.testing.assert_allclose(np.rot90(state.h), state.h, rtol=0, atol=1e-10)
    np.testing.assert_allclose(state.h.T, state.h, rtol=0, atol=1e-10)
    np.testing.assert_allclose(state.hv, state.hu.T, rtol=0, atol=1e-10)


@pytest.mark.slow
def test_front_on_steep_dry_slope_keeps_a_bounded_speed():
    grid = Grid2D(nx=200, ny=1)
    x, _ = grid.mesh()
    params = SweParams.for_depth(0.5)
    topography = Topography.from_cells(np.maximum(0.0, x - 0.3) * 2.0, params.boundary)
    state = SweState(np.where(x < 0.2, 0.5, 0.0), grid.zeros(), grid.zeros())
    dry = DryVelocityField.at_rest(grid)
    limit = 4.0 * math.sqrt(G * 0.5)
    t = 0.0
    for _ in range(3000):
        speed = swe_max_speed(state, dry, params, grid)
        assert speed <= limit
        dt = compute_dt_cfl(speed, grid, params.cfl, params.dt_max)
        result = swe_step(state, topography, dry, params, grid, dt)
        state, dry = result.state, result.dry
        t += dt
    assert np.all(np.isfinite(state.h)) and np.all(state.h >= 0.0)
    assert t > 0.4

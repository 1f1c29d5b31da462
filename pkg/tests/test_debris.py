import numpy as np
import pytest

from solvers.base import DebrisParams
from solvers.debris import (
    DebrisSolver,
    DebrisState,
    DiscreteDebris,
    debris_convective_step,
    debris_general_lambda_step_1d,
    debris_max_speed,
    debris_source_update,
    density_from_spacing,
    discrete_debris_rhs,
    friction_rate,
    integrate_discrete_debris,
    interaction_term_2d,
)
from src.core import BoundarySpec, Grid2D, compute_dt_cfl
from src.errors import OrderingViolated

PERIODIC_X = BoundarySpec(left="periodic", right="periodic")
OPEN_X = BoundarySpec(left="outflow", right="outflow")


@pytest.mark.parametrize("h,expected", [(0.05, 0.0), (0.1, 0.0), (0.025, 10.0)])
def test_friction_rate(h, expected):
    params = DebrisParams(h_f=0.05, beta_f=1.0, tau_f=0.1)
    assert friction_rate(h, params) == pytest.approx(expected, abs=1e-14)


def test_friction_rate_is_finite_on_dry_ground():
    params = DebrisParams()
    rate = friction_rate(np.array([0.0, -1e-3]), params)
    assert np.all(np.isfinite(rate))
    np.testing.assert_allclose(rate, 1e12 / params.tau_f, rtol=1e-9)


def test_source_update_examples():
    params = DebrisParams(tau_d=0.5, h_f=0.05)
    assert debris_source_update(0.7, 0.7, 1.0, 0.3, params) == pytest.approx(0.7, rel=1e-14)
    assert debris_source_update(0.0, 1.0, 1.0, 1e6, params) == pytest.approx(1.0, rel=1e-14)
    assert debris_source_update(0.0, 1.0, 1.0, 0.5, params) == pytest.approx(1.0 - np.exp(-1.0), rel=1e-14)
    assert debris_source_update(0.0, 1.0, 1.0, 0.5, params) == pytest.approx(0.6321, abs=1e-4)


def test_source_update_stops_debris_on_dry_ground():
    params = DebrisParams()
    assert abs(debris_source_update(2.0, 1.0, 0.0, 1e-3, params)) < 1e-12


def rk4_oracle(v, u, h, dt, params, substeps=10_000):
    rate = friction_rate(h, params)
    step = dt / substeps

    def f(w):
        return (u - w) / params.tau_d - rate * w

    for _ in range(substeps):
        k1 = f(v)
        k2 = f(v + 0.5 * step * k1)
        k3 = f(v + 0.5 * step * k2)
        k4 = f(v + step * k3)
        v = v + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v


@pytest.mark.parametrize("ratio", [1e-2, 1.0, 1e2])
def test_source_update_matches_ode_oracle(ratio):
    params = DebrisParams(tau_d=0.5, tau_f=0.2, h_f=0.05, beta_f=1.5)
    v = np.array([0.0, 1.5, -0.4, 2.0])
    u = np.array([1.0, 0.2, 0.3, -1.0])
    h = np.array([1.0, 0.04, 0.02, 0.049])
    rate = 1.0 / params.tau_d + friction_rate(h, params)
    dt = ratio / rate
    exact = debris_source_update(v, u, h, dt, params)
    np.testing.assert_allclose(exact, rk4_oracle(v, u, h, dt, params), rtol=1e-8)

    steady = u / (params.tau_d * rate)
    analytic = steady + (v - steady) * np.exp(-rate * dt)
    np.testing.assert_allclose(exact, analytic, rtol=1e-12, atol=1e-15)


def test_velocity_recovery_in_empty_cells():
    state = DebrisState(np.array([[0.0, 1.0]]), np.array([[0.0, 2.0]]), np.zeros((1, 2)))
    vx, vy = state.velocity(1e-12)
    assert vx[0, 0] == 0.0
    assert vx[0, 1] == pytest.approx(2.0, rel=1e-11)
    assert np.all(vy == 0.0)


def test_empty_debris_stays_empty():
    grid = Grid2D(nx=12, ny=8)
    state = DebrisState.empty(grid)
    for _ in range(5):
        state = debris_convective_step(state, grid, 1e-2)
    assert np.all(state.rho == 0.0) and np.all(state.mx == 0.0)


@pytest.mark.parametrize("boundary", [BoundarySpec(), BoundarySpec(left="periodic", right="periodic",
                                                                   bottom="periodic", top="periodic")])
def test_convective_step_conserves_mass(boundary):
    grid = Grid2D(nx=30, ny=20, x1=2.0)
    rng = np.random.default_rng(2)
    rho = rng.uniform(0.0, 2.0, size=grid.shape)
    rho[rng.uniform(size=grid.shape) < 0.2] = 0.0
    state = DebrisState.from_velocity(rho, rng.normal(size=grid.shape), rng.normal(size=grid.shape))
    mass = state.mass(grid)
    for _ in range(100):
        dt = compute_dt_cfl(debris_max_speed(state), grid, 0.25)
        state = debris_convective_step(state, grid, dt, boundary)
        assert state.rho.min() >= 0.0
    assert state.mass(grid) == pytest.approx(mass, rel=1e-12)


def translation_error(n):
    grid = Grid2D(nx=n, ny=1)
    x, _ = grid.mesh()
    rho0 = 1.0 + 0.5 * np.sin(2.0 * np.pi * x)
    state = DebrisState.from_velocity(rho0, np.ones(grid.shape), grid.zeros())
    steps = 2 * n
    for _ in range(steps):
        state = debris_convective_step(state, grid, 0.5 / n, PERIODIC_X)
    return state, rho0, grid


def test_periodic_translation():
    errors = []
    for n in (50, 100, 200):
        state, rho0, grid = translation_error(n)
        assert state.mass(grid) == pytest.approx(float(np.sum(rho0) * grid.cell_area), rel=1e-12)
        errors.append(np.max(np.abs(state.rho - rho0)))
    assert errors[0] < 0.5
    assert errors[0] > errors[1] > errors[2]
    assert errors[1] / errors[2] > 1.6


def test_lambda_one_transports_momentum_density():
    # with full interaction rho v obeys q_t + v q_x = 0; compare against upwinding that directly
    def discrepancy(n):
        grid = Grid2D(nx=n, ny=1, x1=2.0)
        x, _ = grid.mesh()
        rho = 1.0 + 0.3 * np.exp(-((x - 0.6) / 0.15) ** 2)
        v = 0.8 + 0.1 * np.exp(-((x - 0.5) / 0.2) ** 2)
        state = DebrisState.from_velocity(rho, v, grid.zeros())
        q = (rho * v)[0]
        dt = 0.25 * grid.dx
        for _ in range(int(round(0.4 / dt))):
            state = debris_convective_step(state, grid, dt, OPEN_X)
            q = q - dt / grid.dx * v[0] * np.diff(np.concatenate([[q[0]], q]))
        vx, _ = state.velocity()
        return np.max(np.abs((state.rho * vx)[0] - q))

    coarse = discrepancy(100)
    fine = discrepancy(400)
    assert fine < 0.5 * coarse


def test_interaction_term_examples():
    grid = Grid2D(nx=5, ny=3, x0=0.5, x1=1.5)
    x, _ = grid.mesh()
    rho = np.full(grid.shape, 2.0)
    ax, ay = interaction_term_2d(rho, (x, grid.zeros()), grid, 0.5)
    np.testing.assert_allclose(ax[:, 2], -1.0, rtol=1e-12)
    assert np.all(ay == 0.0)

    still, _ = interaction_term_2d(rho, (np.full(grid.shape, 0.7), np.full(grid.shape, -0.2)), grid, 1.0)
    assert np.all(still == 0.0)
    zero, _ = interaction_term_2d(rho, (x, grid.zeros()), grid, 0.0)
    assert np.all(zero == 0.0)


def test_discrete_rhs_examples():
    params = DebrisParams(lambda_=1.0)
    _, dv = discrete_debris_rhs(DiscreteDebris([0.0, 0.5], [0.0, 1.0]), None, params)
    assert dv[0] == 0.0
    dxdt, dv = discrete_debris_rhs(DiscreteDebris([0.0, 0.5], [1.0, 2.0]), None, params)
    assert dv[0] == pytest.approx(2.0)
    assert dv[1] == 0.0
    np.testing.assert_array_equal(dxdt, [1.0, 2.0])


def test_discrete_rhs_at_rest_in_the_current():
    params = DebrisParams()
    water = (lambda x: np.full_like(x, 0.4), lambda x: np.full_like(x, 1.0))
    _, dv = discrete_debris_rhs(DiscreteDebris([0.0, 0.3], [0.4, 0.4]), water, params)
    np.testing.assert_allclose(dv, 0.0, atol=1e-15)


def test_constant_interaction_option():
    params = DebrisParams(interaction="constant", interaction_speed=0.5)
    _, dv = discrete_debris_rhs(DiscreteDebris([0.0, 0.5], [0.0, 1.0]), None, params)
    assert dv[0] == pytest.approx(1.0)


def test_discrete_ordering_is_enforced():
    with pytest.raises(OrderingViolated) as info:
        discrete_debris_rhs(DiscreteDebris([0.0, 1.0, 0.5], [0.0, 0.0, 0.0]), None, DebrisParams())
    assert info.value.index == 1
    with pytest.raises(OrderingViolated):
        DiscreteDebris([0.0, 0.1], [0.0, 0.0]).gaps(gap_min=0.2)


def test_density_from_spacing():
    params = DebrisParams(rho0=4.0, ell=0.01)
    system = DiscreteDebris([0.0, 0.01, 0.03], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(density_from_spacing(system, params), [4.0, 2.0])

    n, k = 20, 4
    uniform = DiscreteDebris(np.linspace(0.0, 1.0, n, endpoint=False), np.zeros(n))
    samples = density_from_spacing(uniform, DebrisParams(rho0=4.0, ell=1.0 / (n * k)))
    np.testing.assert_allclose(samples, 4.0 / k)


def peak_density(n, lambda_):
    grid = Grid2D(nx=n, ny=1, x1=1.5)
    x, _ = grid.cell_centers()
    rho = np.ones(n)
    v = np.clip(1.0 - 2.5 * (x - 0.3), 0.5, 1.0)
    dt = 0.25 * grid.dx
    t = 0.0
    while t < 0.8 - 1e-12:
        step = min(dt, 0.8 - t)
        rho, v = debris_general_lambda_step_1d(rho, v, grid, step, lambda_, OPEN_X)
        t += step
    return rho.max()


@pytest.mark.slow
def test_interaction_regularizes_delta_shock():
    pressureless = peak_density(800, 0.0) / peak_density(200, 0.0)
    interacting = peak_density(800, 1.0) / peak_density(200, 1.0)
    assert pressureless > 2.0
    assert interacting < 1.2


def continuum_velocity(x):
    return 0.5 * (1.0 - np.tanh((x - 0.5) / 0.25))


@pytest.mark.slow
def test_discrete_and_continuum_densities_agree():
    t_end = 0.3
    count = 10_000
    positions = np.linspace(-1.0, 1.5, count)
    spacing = positions[1] - positions[0]
    params = DebrisParams(lambda_=1.0, rho0=1.0, ell=spacing)
    system = DiscreteDebris(positions, continuum_velocity(positions))
    final = integrate_discrete_debris(system, t_end, params)
    midpoints = 0.5 * (final.x[1:] + final.x[:-1])
    samples = density_from_spacing(final, params)

    grid = Grid2D(nx=200, ny=1, x0=-0.5, x1=1.5)
    x, _ = grid.mesh()
    state = DebrisState.from_velocity(np.ones(grid.shape), continuum_velocity(x), grid.zeros())
    t = 0.0
    while t < t_end - 1e-12:
        dt = min(compute_dt_cfl(debris_max_speed(state), grid, 0.25), t_end - t)
        state = debris_convective_step(state, grid, dt, OPEN_X)
        t += dt

    reference = np.interp(x[0], midpoints, samples)
    error = np.sum(np.abs(state.rho[0] - reference)) / np.sum(np.abs(reference))
    assert reference.max() > 1.3
    assert error < 0.05


def test_solver_step_applies_drag():
    grid = Grid2D(nx=6, ny=4)
    params = DebrisParams()
    solver = DebrisSolver(params, grid)
    state = DebrisState.from_velocity(np.ones(grid.shape), grid.zeros(), grid.zeros())
    moved = solver.step(state, 0.01, h=np.ones(grid.shape), u=np.ones(grid.shape), v=grid.zeros())
    vx, vy = moved.velocity(params.eps_blend)
    np.testing.assert_allclose(vx, -np.expm1(-0.01 / params.tau_d), rtol=1e-10)
    assert np.all(vy == 0.0)
    solver.check_state(moved)
    assert solver.max_signal_speed(moved) == pytest.approx(vx.max())

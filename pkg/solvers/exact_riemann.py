"""Exact solution of the Euler Riemann problem, used as a reference in tests and by `sod`."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from solvers.base import GasParams
from solvers.euler import EulerState, eos_pressure
from src.errors import NoConvergence, NonPhysicalState

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 100
TOLERANCE = 1e-12


@dataclass
class RiemannSample:
    rho: np.ndarray
    u: np.ndarray
    p: np.ndarray
    p_star: float
    u_star: float


def _pressure_function(p, rho_k, p_k, c_k, gamma):
    """Value and derivative of the wave curve through state k at pressure p"""
    if p > p_k:
        a = 2.0 / ((gamma + 1.0) * rho_k)
        b = (gamma - 1.0) / (gamma + 1.0) * p_k
        q = math.sqrt(a / (p + b))
        return (p - p_k) * q, q * (1.0 - 0.5 * (p - p_k) / (b + p))
    ratio = p / p_k
    f = 2.0 * c_k / (gamma - 1.0) * (ratio ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
    fd = ratio ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho_k * c_k)
    return f, fd


def _scalar_primitives(state: EulerState, params: GasParams):
    p, c = eos_pressure(state, params)
    rho = float(np.asarray(state.rho))
    return rho, float(np.asarray(state.mom)) / rho, float(p), float(c)


def star_region(left: EulerState, right: EulerState, params: GasParams):
    """Newton iteration for the contact pressure and velocity"""
    gamma = params.gamma
    rho_l, u_l, p_l, c_l = _scalar_primitives(left, params)
    rho_r, u_r, p_r, c_r = _scalar_primitives(right, params)
    du = u_r - u_l

    if 2.0 * (c_l + c_r) / (gamma - 1.0) <= du:
        raise NonPhysicalState("initial data generate vacuum")

    p_guess = 0.5 * (p_l + p_r) - 0.125 * du * (rho_l + rho_r) * (c_l + c_r)
    p = max(TOLERANCE, p_guess)
    for _ in range(MAX_ITERATIONS):
        f_l, fd_l = _pressure_function(p, rho_l, p_l, c_l, gamma)
        f_r, fd_r = _pressure_function(p, rho_r, p_r, c_r, gamma)
        p_new = p - (f_l + f_r + du) / (fd_l + fd_r)
        if p_new < 0.0:
            p_new = TOLERANCE
        change = 2.0 * abs(p_new - p) / (p_new + p)
        p = p_new
        if change <= TOLERANCE:
            break
    else:
        raise NoConvergence(f"contact pressure did not converge in {MAX_ITERATIONS} iterations")

    f_l, _ = _pressure_function(p, rho_l, p_l, c_l, gamma)
    f_r, _ = _pressure_function(p, rho_r, p_r, c_r, gamma)
    return p, 0.5 * (u_l + u_r) + 0.5 * (f_r - f_l)


def _sample_side(s, p_star, u_star, rho_k, u_k, p_k, c_k, gamma, sign):
    """Sample on one side of the contact; ``sign`` is -1 for the left state, +1 for the right"""
    g1 = (gamma - 1.0) / (gamma + 1.0)
    if p_star > p_k:
        shock = u_k + sign * c_k * math.sqrt((gamma + 1.0) / (2.0 * gamma) * p_star / p_k
                                             + (gamma - 1.0) / (2.0 * gamma))
        if sign * (s - shock) >= 0.0:
            return rho_k, u_k, p_k
        ratio = p_star / p_k
        return rho_k * (ratio + g1) / (ratio * g1 + 1.0), u_star, p_star

    c_star = c_k * (p_star / p_k) ** ((gamma - 1.0) / (2.0 * gamma))
    head = u_k + sign * c_k
    tail = u_star + sign * c_star
    if sign * (s - head) >= 0.0:
        return rho_k, u_k, p_k
    if sign * (s - tail) <= 0.0:
        return rho_k * (p_star / p_k) ** (1.0 / gamma), u_star, p_star
    c = 2.0 / (gamma + 1.0) * (c_k - sign * 0.5 * (gamma - 1.0) * (u_k - s))
    u = 2.0 / (gamma + 1.0) * (-sign * c_k + 0.5 * (gamma - 1.0) * u_k + s)
    rho = rho_k * (c / c_k) ** (2.0 / (gamma - 1.0))
    return rho, u, p_k * (c / c_k) ** (2.0 * gamma / (gamma - 1.0))


def exact_riemann_oracle(left: EulerState, right: EulerState, params: GasParams, x_over_t) -> RiemannSample:
    """
    Sample the self-similar exact solution at the given ``x/t`` values.

    Args:
    left (EulerState): Scalar left state.
    right (EulerState): Scalar right state.
    params (GasParams): Equation of state.
    x_over_t (array-like): Similarity coordinates, relative to the initial discontinuity.

    Returns:
    RiemannSample: Density, velocity and pressure at each sample plus the star values.
    """
    gamma = params.gamma
    p_star, u_star = star_region(left, right, params)
    rho_l, u_l, p_l, c_l = _scalar_primitives(left, params)
    rho_r, u_r, p_r, c_r = _scalar_primitives(right, params)

    samples = np.atleast_1d(np.asarray(x_over_t, dtype=float))
    out = np.empty((3, samples.size))
    for k, s in enumerate(samples):
        if s <= u_star:
            out[:, k] = _sample_side(s, p_star, u_star, rho_l, u_l, p_l, c_l, gamma, -1.0)
        else:
            out[:, k] = _sample_side(s, p_star, u_star, rho_r, u_r, p_r, c_r, gamma, 1.0)
    logger.debug("exact Riemann: p*=%s u*=%s", p_star, u_star)
    return RiemannSample(rho=out[0], u=out[1], p=out[2], p_star=p_star, u_star=u_star)


def shock_tube_errors(x: np.ndarray, state: EulerState, t: float, params: GasParams,
                      left=(1.0, 0.0, 1.0), right=(0.125, 0.0, 0.1), x_split: float = 0.5,
                      dx: Optional[float] = None) -> dict:
    """
    L1 errors of density, velocity and pressure against the exact solution.

    At ``t = 0`` the reference is the initial step itself. ``dx`` defaults to the
    spacing of ``x`` and must be given for a single cell.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t < 0.0:
        raise ValueError(f"time must be non-negative, got {t}")
    if dx is None:
        if x.size < 2:
            raise ValueError("dx is required when x holds a single cell")
        dx = float(x[1] - x[0])
    if t == 0.0:
        on_left = x < x_split
        exact = [np.where(on_left, a, b) for a, b in zip(left, right)]
    else:
        solution = exact_riemann_oracle(EulerState.from_primitive(*left, params),
                                        EulerState.from_primitive(*right, params),
                                        params, (x - x_split) / t)
        exact = [solution.rho, solution.u, solution.p]
    numeric = state.primitives(params)
    return {name: float(np.sum(np.abs(value - reference)) * dx)
            for name, value, reference in zip(("rho", "u", "p"), numeric, exact)}

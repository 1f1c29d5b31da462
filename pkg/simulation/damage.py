import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from solvers.debris import DebrisState
from src.core import Grid2D

logger = logging.getLogger(__name__)


@dataclass
class DamageField:
    """Time-integrated debris momentum per cell, plus the running peak debris density"""

    D: np.ndarray
    rho_d_max: np.ndarray
    D_vec: Optional[tuple[np.ndarray, np.ndarray]] = None

    @classmethod
    def zeros(cls, grid: Grid2D, vector: bool = False, rho: Optional[np.ndarray] = None) -> "DamageField":
        peak = grid.zeros() if rho is None else np.array(rho, dtype=float)
        return cls(D=grid.zeros(), rho_d_max=peak, D_vec=(grid.zeros(), grid.zeros()) if vector else None)

    def copy(self) -> "DamageField":
        vec = None if self.D_vec is None else (self.D_vec[0].copy(), self.D_vec[1].copy())
        return DamageField(self.D.copy(), self.rho_d_max.copy(), vec)

    @property
    def peak(self) -> float:
        return float(np.max(self.D))


def damage_accumulate(damage: DamageField, debris: DebrisState, dt: float,
                      eps_blend: float = 1e-12) -> DamageField:
    """Left-rectangle step ``D += rho |v| dt``; also ``D_vec += rho v dt`` when tracked."""
    vx, vy = debris.velocity(eps_blend)
    D = damage.D + debris.rho * np.hypot(vx, vy) * dt
    D_vec = None
    if damage.D_vec is not None:
        D_vec = (damage.D_vec[0] + debris.rho * vx * dt, damage.D_vec[1] + debris.rho * vy * dt)
    return DamageField(D=D, rho_d_max=np.maximum(damage.rho_d_max, debris.rho), D_vec=D_vec)

from abc import ABC, abstractmethod
from typing import Any, Dict, Literal

from pydantic import BaseModel, ConfigDict, Field

from src.core import BoundarySpec, Grid2D, LimiterParams, compute_dt_cfl

__all__ = [
    "BaseSolver",
    "CouplingMode",
    "DebrisParams",
    "GasParams",
    "LimiterParams",
    "SweParams",
    "WetDryParams",
]

TimeScheme = Literal["heun", "midpoint", "euler"]


class GasParams(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    gamma: float = Field(default=1.4, gt=1.0, le=3.0)


class WetDryParams(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    h_wet: float = Field(default=1e-6, gt=0.0)
    eps_blend: float = Field(default=1e-12, gt=0.0)
    eps_mode: Literal["fixed", "adaptive"] = "fixed"
    mu_relax: float = Field(default=1e-3, gt=0.0)
    sigma_floor: float = Field(default=1e-8 * 9.81 ** 0.5, ge=0.0)
    # layers thinner than h_thin get a desingularized velocity and a raised Riemann speed
    h_thin: float = Field(default=1e-3, gt=0.0)
    # friction time of the dry velocity on dry ground
    tau_dry: float = Field(default=0.05, gt=0.0)


class SweParams(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    gravity: float = Field(default=9.81, gt=0.0)
    cfl: float = Field(default=0.25, gt=0.0, le=1.0)
    dt_max: float = Field(default=1e-3, gt=0.0)
    reference_depth: float = Field(default=1.0, gt=0.0)
    wetdry: WetDryParams = WetDryParams()
    boundary: BoundarySpec = BoundarySpec()
    time_scheme: TimeScheme = "heun"

    @classmethod
    def for_depth(cls, reference_depth: float, gravity: float = 9.81, **kwargs) -> "SweParams":
        """Parameters whose wet threshold and speed floor scale with a reference depth"""
        wetdry = dict(kwargs.pop("wetdry", {}))
        wetdry.setdefault("h_wet", 1e-6 * reference_depth)
        wetdry.setdefault("h_thin", 1e-3 * reference_depth)
        wetdry.setdefault("sigma_floor", 1e-8 * (gravity * reference_depth) ** 0.5)
        return cls(reference_depth=reference_depth, gravity=gravity,
                   wetdry=WetDryParams(**wetdry), **kwargs)

    @property
    def dry_sigma(self) -> float:
        return (self.gravity * self.reference_depth) ** 0.5


class DebrisParams(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, populate_by_name=True)

    lambda_: float = Field(default=1.0, ge=0.0, le=1.0, alias="lambda")
    tau_d: float = Field(default=0.5, gt=0.0)
    tau_f: float = Field(default=0.05, gt=0.0)
    h_f: float = Field(default=0.05, gt=0.0)
    beta_f: float = Field(default=1.0, gt=0.0)
    rho0: float = Field(default=4.0, gt=0.0)
    ell: float = Field(default=0.01, gt=0.0)
    eps_blend: float = Field(default=1e-12, gt=0.0)
    interaction: Literal["velocity", "constant"] = "velocity"
    interaction_speed: float = Field(default=1.0, ge=0.0)


class CouplingMode(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    kind: Literal["one_way", "two_way"] = "one_way"
    mu_debris: float = Field(default=0.0, ge=0.0)


class BaseSolver(ABC):
    """Abstract base class for all finite-volume solvers"""

    name = "base"

    def __init__(self, params: BaseModel, grid: Grid2D):
        self.params = params
        self.grid = grid

    @abstractmethod
    def max_signal_speed(self, state: Any) -> float:
        """Largest signal speed carried by the state"""
        pass

    @abstractmethod
    def step(self, state: Any, dt: float, **kwargs) -> Any:
        """Advance the state by one time step"""
        pass

    @abstractmethod
    def check_state(self, state: Any) -> None:
        """Raise if the state violates its invariants"""
        pass

    def stable_dt(self, state: Any, cfl: float, dt_max: float = 1e-3) -> float:
        """CFL-limited time step for the state"""
        return compute_dt_cfl(self.max_signal_speed(state), self.grid, cfl, dt_max)

    def get_solver_info(self) -> Dict[str, Any]:
        """Get information about the solver"""
        return {
            "name": self.name,
            "grid": self.grid.model_dump(),
            "params": self.params.model_dump(by_alias=True),
        }

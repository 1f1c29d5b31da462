import logging
from typing import Any, Dict, List, Optional

from pydantic import BaseModel

from src.core import Grid2D

from .base import BaseSolver
from .debris import DebrisSolver
from .swe import SweSolver

logger = logging.getLogger(__name__)


class SolverManager:
    """Manages the finite-volume solvers of a run"""

    def __init__(self):
        self.solvers: Dict[str, BaseSolver] = {}
        self.solver_classes = {
            "swe": SweSolver,
            "debris": DebrisSolver,
        }

    def add_solver(self, kind: str, params: BaseModel, grid: Grid2D, name: Optional[str] = None,
                   **kwargs) -> BaseSolver:
        """Build a solver of the given kind and register it under ``name`` (defaults to the kind)"""
        solver_class = self.solver_classes.get(kind)
        if not solver_class:
            raise ValueError(f"Unknown solver: {kind}")

        solver = solver_class(params, grid, **kwargs)
        self.solvers[name or kind] = solver
        logger.debug("registered %s solver on %sx%s grid", kind, grid.nx, grid.ny)
        return solver

    def list_solvers(self) -> List[Dict[str, Any]]:
        """List registered solvers with their parameters"""
        return [dict(solver.get_solver_info(), name=name) for name, solver in self.solvers.items()]

    def clear(self) -> None:
        self.solvers.clear()


# Global solver manager instance
solver_manager = SolverManager()

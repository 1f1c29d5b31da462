from pathlib import Path

import numpy as np
import pytest

from solvers.base import SweParams
from solvers.solver_manager import solver_manager
from src.config import load_config
from src.core import BoundarySpec, Grid2D

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_CONFIG = REPO_ROOT / "configs" / "three_obstacles.cfg"


@pytest.fixture(autouse=True)
def clean_solver_manager():
    solver_manager.clear()
    yield
    solver_manager.clear()


@pytest.fixture
def scenario_config_path():
    return SCENARIO_CONFIG


@pytest.fixture
def scenario_config():
    return load_config(SCENARIO_CONFIG)


@pytest.fixture
def walls():
    return BoundarySpec()


@pytest.fixture
def beach_params():
    return SweParams.for_depth(0.5, boundary=BoundarySpec(left="wall", right="wall"))


def gaussian_bump(grid: Grid2D, height=0.5, width=0.1, center=(0.5, 0.5)):
    x, y = grid.mesh()
    return height * np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2) / width ** 2)

"""Frame, profile, topography and manifest files.

CSV tables go through pandas with 17 significant digits so every float64
survives a write/read cycle unchanged; VTK frames use the legacy ASCII
STRUCTURED_POINTS layout with one value per cell.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd

from src.core import Grid2D, ensure_finite
from src.errors import DimensionMismatch, IoError, NonFiniteValue

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FRAME_COLUMNS = ["x", "y", "h", "hu", "hv", "z", "rho_d", "vdx", "vdy", "D"]
FLOAT_FORMAT = "%.17g"


@dataclass
class OutputFrame:
    t: float
    step: int
    grid: Grid2D
    h: np.ndarray
    hu: np.ndarray
    hv: np.ndarray
    z: np.ndarray
    rho_d: np.ndarray
    vdx: np.ndarray
    vdy: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in FRAME_COLUMNS[2:]:
            values = np.array(getattr(self, name), dtype=float)
            if values.size != self.grid.size:
                raise DimensionMismatch(f"frame field {name} has {values.size} values, "
                                        f"expected {self.grid.size}")
            ensure_finite(name, values)
            setattr(self, name, values.reshape(self.grid.shape))

    def water_velocity(self) -> tuple[np.ndarray, np.ndarray]:
        wet = self.h > 0.0
        u = np.divide(self.hu, self.h, out=np.zeros_like(self.h), where=wet)
        v = np.divide(self.hv, self.h, out=np.zeros_like(self.h), where=wet)
        return u, v

    def table(self) -> pd.DataFrame:
        x, y = self.grid.mesh()
        data = {"x": x.ravel(), "y": y.ravel()}
        for name in FRAME_COLUMNS[2:]:
            data[name] = getattr(self, name).ravel()
        return pd.DataFrame(data, columns=FRAME_COLUMNS)


def _ensure_parent(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"cannot create directory: {e}", path=str(path.parent)) from e


def write_frame_csv(frame: OutputFrame, path: PathLike) -> None:
    """Write a frame as ``x,y,h,hu,hv,z,rho_d,vdx,vdy,D``, one row per cell in row-major order"""
    path = Path(path)
    _ensure_parent(path)
    try:
        frame.table().to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise IoError(f"cannot write frame: {e}", path=str(path)) from e


def read_frame_csv(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except OSError as e:
        raise IoError(f"cannot read frame: {e}", path=str(path)) from e


def write_profile_csv(path: PathLike, columns: Dict[str, np.ndarray]) -> None:
    """Write 1D profiles (for example ``x,rho,u,p``) column by column"""
    path = Path(path)
    _ensure_parent(path)
    try:
        pd.DataFrame({name: np.ravel(values) for name, values in columns.items()}).to_csv(
            path, index=False, float_format=FLOAT_FORMAT)
    except OSError as e:
        raise IoError(f"cannot write profile: {e}", path=str(path)) from e


def _vtk_scalars(f, name: str, values: np.ndarray) -> None:
    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    np.savetxt(f, values.reshape(-1, 1), fmt=FLOAT_FORMAT)


def _vtk_vectors(f, name: str, vx: np.ndarray, vy: np.ndarray) -> None:
    f.write(f"VECTORS {name} double\n")
    np.savetxt(f, np.column_stack([vx.ravel(), vy.ravel(), np.zeros(vx.size)]), fmt=FLOAT_FORMAT)


def write_frame_vtk(frame: OutputFrame, path: PathLike) -> None:
    """
    Write a frame as a legacy ASCII VTK structured-points file with cell data.

    Parameters:
    frame (OutputFrame): Snapshot to write.
    path (str or Path): Destination file.
    """
    path = Path(path)
    _ensure_parent(path)
    grid = frame.grid
    u, v = frame.water_velocity()
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write("# vtk DataFile Version 3.0\n")
            f.write(f"flood frame step {frame.step} t {frame.t!r}\n")
            f.write("ASCII\nDATASET STRUCTURED_POINTS\n")
            f.write(f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1\n")
            f.write(f"ORIGIN {grid.x0!r} {grid.y0!r} 0\n")
            f.write(f"SPACING {grid.dx!r} {grid.dy!r} 1\n")
            f.write(f"CELL_DATA {grid.size}\n")
            for name in ("h", "z", "rho_d", "D"):
                _vtk_scalars(f, name, getattr(frame, name))
            _vtk_vectors(f, "water_velocity", u, v)
            _vtk_vectors(f, "debris_velocity", frame.vdx, frame.vdy)
    except OSError as e:
        raise IoError(f"cannot write frame: {e}", path=str(path)) from e


def read_topography_file(path: PathLike, grid: Grid2D) -> np.ndarray:
    """
    Read a gridded topography: header ``nx ny x0 x1 y0 y1``, then ``ny`` rows of ``nx`` values.

    Row ``j`` holds the cells with y index ``j`` counted from ``y0``.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().split()
        values = np.loadtxt(path, skiprows=1, ndmin=2)
    except OSError as e:
        raise IoError(f"cannot read topography: {e}", path=str(path)) from e
    except ValueError as e:
        raise DimensionMismatch(f"malformed topography file {path}: {e}") from e

    if len(header) != 6:
        raise DimensionMismatch(f"topography header must be 'nx ny x0 x1 y0 y1', got {' '.join(header)!r}")
    nx, ny = int(header[0]), int(header[1])
    bounds = [float(b) for b in header[2:]]
    if (nx, ny) != (grid.nx, grid.ny):
        raise DimensionMismatch(f"topography is {nx}x{ny}, grid is {grid.nx}x{grid.ny}")
    if not np.allclose(bounds, [grid.x0, grid.x1, grid.y0, grid.y1], rtol=0.0, atol=1e-12):
        raise DimensionMismatch(f"topography bounds {bounds} differ from the grid bounds")
    if values.shape != (ny, nx):
        raise DimensionMismatch(f"topography has {values.shape[0]}x{values.shape[1]} values, "
                                f"header says {ny}x{nx}")
    bad = ~np.isfinite(values)
    if bad.any():
        raise NonFiniteValue("non-finite topography value", index=int(np.flatnonzero(bad)[0]))
    return values


def write_topography(path: PathLike, z: np.ndarray, grid: Grid2D) -> None:
    path = Path(path)
    _ensure_parent(path)
    header = f"{grid.nx} {grid.ny} {grid.x0!r} {grid.x1!r} {grid.y0!r} {grid.y1!r}"
    try:
        np.savetxt(path, np.asarray(z, dtype=float).reshape(grid.shape), fmt=FLOAT_FORMAT,
                   header=header, comments="")
    except OSError as e:
        raise IoError(f"cannot write topography: {e}", path=str(path)) from e


def write_to_json(file_name: PathLike, content, mode='w', indent=4):
    try:
        with open(file_name, mode, encoding='utf-8') as f:
            json.dump(content, f, ensure_ascii=False, indent=indent)
    except OSError as e:
        raise IoError(f"cannot write json: {e}", path=str(file_name)) from e


def try_load_json(json_file: PathLike):
    try:
        with open(json_file, "r", encoding='utf-8') as f:
            return json.load(f)
    except (OSError, json.decoder.JSONDecodeError):
        logger.warning("could not read %s", json_file)
        return None

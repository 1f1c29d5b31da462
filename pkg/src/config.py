"""Run configuration: pydantic models and the sectioned ``key = value`` text format.

The grammar is documented in ``docs/formats.md``. Every section is its own
model with ``extra="forbid"``; pydantic failures are translated into
``UnknownKey`` or ``ValidationError`` carrying the key and the line number.
"""

import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from solvers.base import CouplingMode, DebrisParams, SweParams, TimeScheme
from src.core import BoundarySpec, Grid2D
from src.errors import IoError, ParseError, UnknownKey, ValidationError

logger = logging.getLogger(__name__)

SECTION_RE = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)(?:\.(\d+))?\s*\]$")
KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
MAX_THREADS = 32


class SimulationSection(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    scenario: str = "custom"
    t_end: float = Field(default=1.0, ge=0.0)
    cfl: float = Field(default=0.25, gt=0.0, le=1.0)
    dt_max: float = Field(default=1e-3, gt=0.0)
    gravity: float = Field(default=9.81, gt=0.0)
    limiter_beta: float = Field(default=1.5, ge=1.0, le=2.0)
    time_scheme: TimeScheme = "heun"
    max_steps: int = Field(default=1_000_000, ge=1)


class WaterSection(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    still_level: float = 0.0
    reference_depth: float = Field(default=1.0, gt=0.0)
    h_wet: Optional[float] = Field(default=None, gt=0.0)
    eps_blend: float = Field(default=1e-12, gt=0.0)
    eps_mode: Literal["fixed", "adaptive"] = "fixed"
    mu_relax: float = Field(default=1e-3, gt=0.0)
    sigma_floor: Optional[float] = Field(default=None, ge=0.0)
    h_thin: Optional[float] = Field(default=None, gt=0.0)
    tau_dry: float = Field(default=0.05, gt=0.0)


class TopographySection(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    kind: Literal["analytic", "file"] = "analytic"
    base: float = 0.0
    slope_x: float = 0.0
    slope_y: float = 0.0
    file: Optional[str] = None

    @model_validator(mode="after")
    def check_file(self) -> "TopographySection":
        if self.kind == "file" and not self.file:
            raise ValueError("topography kind 'file' needs a file")
        return self


class Hill(BaseModel):
    """Gaussian bump ``height * exp(-r^2 / width^2)``"""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    x: float
    y: float = 0.0
    height: float
    width: float = Field(gt=0.0)


class Region(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    xmin: float
    xmax: float
    ymin: float = -1e300
    ymax: float = 1e300

    @model_validator(mode="after")
    def check_order(self) -> "Region":
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("region needs xmin < xmax and ymin < ymax")
        return self

    def contains(self, x, y):
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)


class WaveRegion(Region):
    elevation: float


class DebrisRegion(Region):
    density: float = Field(ge=0.0)


class DebrisSection(DebrisParams):
    enabled: bool = False

    def params(self) -> DebrisParams:
        return DebrisParams(**self.model_dump(exclude={"enabled"}))


class DamageSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vector: bool = False


class ParticlesSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count: int = Field(default=0, ge=0)
    integrator: Literal["euler", "heun"] = "heun"
    seed: int = 0


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = "output"
    cadence: int = Field(default=100, ge=1)
    formats: List[Literal["csv", "vtk"]] = Field(default_factory=lambda: ["csv", "vtk"], min_length=1)

    @field_validator("formats", mode="before")
    @classmethod
    def split_formats(cls, value):
        if isinstance(value, str):
            return [value]
        return value


class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    simulation: SimulationSection = SimulationSection()
    grid: Grid2D = Grid2D()
    boundary: BoundarySpec = BoundarySpec()
    water: WaterSection = WaterSection()
    topography: TopographySection = TopographySection()
    hills: List[Hill] = Field(default_factory=list)
    waves: List[WaveRegion] = Field(default_factory=list)
    debris: DebrisSection = DebrisSection()
    debris_regions: List[DebrisRegion] = Field(default_factory=list)
    coupling: CouplingMode = CouplingMode()
    damage: DamageSection = DamageSection()
    particles: ParticlesSection = ParticlesSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def check_debris_model(self) -> "SimConfig":
        if self.debris.enabled and self.grid.ny > 1 and self.debris.lambda_ != 1.0:
            raise ValueError("debris lambda must be 1 for two-dimensional runs")
        return self

    def swe_params(self) -> SweParams:
        water = self.water
        wetdry = {"eps_blend": water.eps_blend, "eps_mode": water.eps_mode, "mu_relax": water.mu_relax,
                  "tau_dry": water.tau_dry}
        if water.h_wet is not None:
            wetdry["h_wet"] = water.h_wet
        if water.sigma_floor is not None:
            wetdry["sigma_floor"] = water.sigma_floor
        if water.h_thin is not None:
            wetdry["h_thin"] = water.h_thin
        sim = self.simulation
        return SweParams.for_depth(water.reference_depth, gravity=sim.gravity, cfl=sim.cfl,
                                   dt_max=sim.dt_max, boundary=self.boundary,
                                   time_scheme=sim.time_scheme, wetdry=wetdry)


# text section name -> SimConfig field
SECTIONS = {
    "simulation": "simulation",
    "grid": "grid",
    "boundary": "boundary",
    "water": "water",
    "topography": "topography",
    "debris": "debris",
    "coupling": "coupling",
    "damage": "damage",
    "particles": "particles",
    "output": "output",
}
INDEXED_SECTIONS = {
    "hill": "hills",
    "wave": "waves",
    "debris_region": "debris_regions",
}


def _parse_value(raw: str, line: int):
    if not raw:
        raise ParseError("missing value", line=line)
    if "," in raw:
        items = [item.strip() for item in raw.split(",")]
        if not all(items):
            raise ParseError("empty list item", line=line)
        return items
    return raw


COMMENT = re.compile(r"(?:^|\s)[#;]")


def _strip_comment(line: str) -> str:
    """Drop a comment starting at the beginning of the line or after whitespace"""
    match = COMMENT.search(line)
    if match:
        line = line[:match.start()]
    return line.strip()


def _read_sections(text: str):
    """Split the document into raw section dictionaries and a ``loc -> line`` map"""
    plain: Dict[str, Dict[str, Any]] = {}
    indexed: Dict[str, Dict[int, Dict[str, Any]]] = {}
    lines: Dict[Tuple, int] = {}
    current: Optional[Dict[str, Any]] = None
    current_key: Tuple = ()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        match = SECTION_RE.match(line)
        if match:
            name, index = match.group(1), match.group(2)
            if name in SECTIONS and index is None:
                if name in plain:
                    raise ParseError(f"duplicate section [{name}]", line=lineno)
                current = plain[name] = {}
                current_key = (SECTIONS[name],)
            elif name in INDEXED_SECTIONS and index is not None:
                group = indexed.setdefault(name, {})
                if int(index) in group:
                    raise ParseError(f"duplicate section [{name}.{index}]", line=lineno)
                current = group[int(index)] = {}
                current_key = (INDEXED_SECTIONS[name], int(index))
            elif name in INDEXED_SECTIONS:
                raise ParseError(f"section [{name}] needs an index, e.g. [{name}.0]", line=lineno)
            else:
                raise UnknownKey(f"[{line[1:-1].strip()}]", line=lineno)
            lines[current_key] = lineno
            continue

        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected '[section]' or 'key = value'", line=lineno)
        key = key.strip()
        if not KEY_RE.match(key):
            raise ParseError(f"invalid key {key!r}", line=lineno)
        if current is None:
            raise ParseError(f"key {key!r} outside of any section", line=lineno)
        if key in current:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        current[key] = _parse_value(value.strip(), lineno)
        lines[current_key + (key,)] = lineno

    data: Dict[str, Any] = {SECTIONS[name]: values for name, values in plain.items()}
    for name, group in indexed.items():
        field = INDEXED_SECTIONS[name]
        data[field] = []
        for position, index in enumerate(sorted(group)):
            data[field].append(group[index])
            # pydantic reports list items by position, the text by index
            for loc, lineno in list(lines.items()):
                if loc[:2] == (field, index):
                    lines[(field, position) + loc[2:]] = lineno
    return data, lines


def _line_for(loc: Tuple, lines: Dict[Tuple, int]) -> Optional[int]:
    while loc:
        if loc in lines:
            return lines[loc]
        loc = loc[:-1]
    return None


def _translate(error: pydantic.ValidationError, lines: Dict[Tuple, int]) -> Exception:
    first = error.errors()[0]
    loc = tuple(first["loc"])
    key = ".".join(str(part) for part in loc) or "config"
    line = _line_for(loc, lines)
    if first["type"] == "extra_forbidden":
        return UnknownKey(key, line=line)
    return ValidationError(first["msg"], key=key, line=line)


def parse_config(text: str) -> SimConfig:
    """
    Parse and validate a configuration document.

    Args:
    text (str): Sectioned ``key = value`` document; an empty document gives the defaults.

    Returns:
    SimConfig: The validated configuration.
    """
    data, lines = _read_sections(text)
    try:
        return SimConfig.model_validate(data)
    except pydantic.ValidationError as e:
        raise _translate(e, lines) from None


def load_config(path) -> SimConfig:
    """Read a configuration file; a relative topography file is resolved against its directory"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IoError(f"cannot read config: {e}", path=str(path)) from e
    config = parse_config(text)
    topo_file = config.topography.file
    if topo_file and not Path(topo_file).is_absolute():
        topography = config.topography.model_copy(update={"file": str(path.parent / topo_file)})
        config = config.model_copy(update={"topography": topography})
    logger.info("loaded config %s (scenario %s)", path, config.simulation.scenario)
    return config


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _dump_section(header: str, model: BaseModel) -> List[str]:
    out = [f"[{header}]"]
    for key, value in model.model_dump(by_alias=True).items():
        if value is not None:
            out.append(f"{key} = {_format_value(value)}")
    return out


def dump_config(config: SimConfig) -> str:
    """Serialize a configuration so that ``parse_config(dump_config(c)) == c``"""
    out: List[str] = []
    for name, field in SECTIONS.items():
        out.extend(_dump_section(name, getattr(config, field)))
        out.append("")
    for name, field in INDEXED_SECTIONS.items():
        for index, item in enumerate(getattr(config, field)):
            out.extend(_dump_section(f"{name}.{index}", item))
            out.append("")
    return "\n".join(out)


def sim_threads() -> int:
    """Worker count for frame writers from ``SIM_THREADS``"""
    raw = os.environ.get("SIM_THREADS")
    if raw is None or not raw.strip():
        return min(4, os.cpu_count() or 1)
    try:
        threads = int(raw)
    except ValueError:
        raise ValidationError(f"must be a positive integer, got {raw!r}", key="SIM_THREADS") from None
    if threads < 1:
        raise ValidationError(f"must be a positive integer, got {raw!r}", key="SIM_THREADS")
    if threads > MAX_THREADS:
        logger.warning("SIM_THREADS=%s is larger than %s, using %s", threads, MAX_THREADS, MAX_THREADS)
        return MAX_THREADS
    return threads

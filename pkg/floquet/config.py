"""
Run files.

A run file is an INI document with the sections ``[system]``, ``[propagation]``,
``[tolerances]``, ``[perturbation]``, ``[scan]`` and ``[output]``; every key is optional
and falls back to the built-in default. Command-line flags are applied on top.

    [system]
    family = mathieu
    a = 7.0
    b = 4.0

    [perturbation]
    u = 0.8913, 0.7621
    scales = 1.0, 0.1, 0.01, 0.001

    [scan]
    grid = a=5.0:20.0:16; b=0.0:5.0:6
"""

import configparser
import io
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Final, List, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, FloquetError
from .integrator import Method, PropagationConfig
from .lab import DEFAULT_SCALES
from .spectral import SpectralTolerances
from .symplectic import RankOneUpdate
from .systems import FAMILIES, PeriodicCoefficient, build_system

__all__ = [
    "PRESETS",
    "RunConfig",
    "ScanAxis",
    "SystemSpec",
    "load_run_config",
    "parse_floats",
    "parse_param",
    "preset_names",
]

LOG: Final = logging.getLogger("floquet.config")
PRESETS: Final[str] = "data"
MAX_AXES: Final[int] = 2

ParamValue = Union[float, str]


def _number_or_text(text: str) -> ParamValue:
    try:
        return float(text)
    except ValueError:
        return text.strip()


def parse_floats(text: str) -> Tuple[float, ...]:
    """``"1, 0.1, 1e-2"`` → (1.0, 0.1, 0.01)."""
    try:
        values = tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError as e:
        raise ConfigError(f"not a list of numbers: {text!r}") from e
    if not values:
        raise ConfigError("empty list of numbers")
    return values


def parse_param(text: str) -> Tuple[str, ParamValue]:
    """``"a=7"`` → ("a", 7.0)."""
    name, sep, value = text.partition("=")
    name = name.strip().lower()
    if not sep or not name or not value.strip():
        raise ConfigError(f"expected name=value, got {text!r}")
    return name, _number_or_text(value)


@dataclass(frozen=True)
class SystemSpec:
    family: str = "mathieu"
    params: Mapping[str, ParamValue] = field(default_factory=lambda: {"a": 7.0, "b": 4.0})

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown system family {self.family!r}; choose from {', '.join(FAMILIES)}")
        object.__setattr__(self, "params", dict(self.params))

    def build(self) -> PeriodicCoefficient:
        return build_system(self.family, self.params)

    def with_params(self, overrides: Mapping[str, ParamValue]) -> "SystemSpec":
        return replace(self, params={**self.params, **overrides})


@dataclass(frozen=True)
class ScanAxis:
    name: str
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError(f"axis {self.name} needs at least one point")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ConfigError(f"axis {self.name} has non-finite bounds")

    @classmethod
    def parse(cls, text: str) -> "ScanAxis":
        """``"a=5:20:16"``: 16 points from 5 to 20 inclusive."""
        name, value = parse_param(text)
        parts = str(value).split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid axis must be NAME=start:stop:count, got {text!r}")
        try:
            return cls(name, float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as e:
            raise ConfigError(f"bad grid axis {text!r}: {e}") from e

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    def __str__(self) -> str:
        return f"{self.name}={float(self.start)!r}:{float(self.stop)!r}:{self.count}"


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec = field(default_factory=SystemSpec)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    tolerances: SpectralTolerances = field(default_factory=SpectralTolerances)
    u: Optional[Tuple[float, ...]] = None
    scales: Tuple[float, ...] = DEFAULT_SCALES
    periods: int = 1
    seed: Optional[int] = None
    grid: Tuple[ScanAxis, ...] = ()
    workers: Optional[int] = None
    out_json: Optional[str] = None
    out_csv: Optional[str] = None

    def __post_init__(self):
        if len(self.grid) > MAX_AXES:
            raise ConfigError(f"at most {MAX_AXES} grid axes are supported")
        if len({axis.name for axis in self.grid}) != len(self.grid):
            raise ConfigError("grid axes must have distinct names")
        if self.periods < 1:
            raise ConfigError(f"periods must be positive, got {self.periods}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")

    def update(self) -> RankOneUpdate:
        """The configured u, or the zero update when none is set."""
        system = self.system.build()
        if self.u is None:
            return RankOneUpdate.zero(system.dimension)
        return RankOneUpdate(self.u)

    def dumps(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser["system"] = {"family": self.system.family}
        for name, value in self.system.params.items():
            parser["system"][name] = repr(float(value)) if isinstance(value, float) else str(value)
        parser["propagation"] = {
            name: value.value if isinstance(value, Method) else repr(value)
            for name, value in asdict(self.propagation).items()
        }
        parser["tolerances"] = {
            name: value if isinstance(value, str) else repr(value)
            for name, value in asdict(self.tolerances).items()
        }
        perturbation = {"scales": ", ".join(repr(float(s)) for s in self.scales), "periods": str(self.periods)}
        if self.u is not None:
            perturbation["u"] = ", ".join(repr(float(v)) for v in self.u)
        if self.seed is not None:
            perturbation["seed"] = str(self.seed)
        parser["perturbation"] = perturbation
        scan = {}
        if self.grid:
            scan["grid"] = "; ".join(map(str, self.grid))
        if self.workers is not None:
            scan["workers"] = str(self.workers)
        parser["scan"] = scan
        output = {}
        if self.out_json is not None:
            output["json"] = self.out_json
        if self.out_csv is not None:
            output["csv"] = self.out_csv
        parser["output"] = output
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    @classmethod
    def loads(cls, text: str, *, source: str = "<string>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as e:
            raise ConfigError(f"{source}: {e}") from e
        unknown = set(parser.sections()) - {"system", "propagation", "tolerances", "perturbation", "scan", "output"}
        if unknown:
            raise ConfigError(f"{source}: unknown section(s) {', '.join(sorted(unknown))}")
        try:
            return cls()._merged(parser)
        except FloquetError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{source}: {e}") from e

    def _merged(self, parser: configparser.ConfigParser) -> "RunConfig":
        changes: Dict[str, Any] = {}
        if parser.has_section("system"):
            section = dict(parser["system"])
            family = section.pop("family", self.system.family)
            params = {k: _number_or_text(v) for k, v in section.items()}
            if family == self.system.family:
                changes["system"] = self.system.with_params(params)
            else:
                changes["system"] = SystemSpec(family, params)
        if parser.has_section("propagation"):
            changes["propagation"] = _section(PropagationConfig, self.propagation, parser["propagation"])
        if parser.has_section("tolerances"):
            changes["tolerances"] = _section(SpectralTolerances, self.tolerances, parser["tolerances"])
        if parser.has_section("perturbation"):
            section = dict(parser["perturbation"])
            if "u" in section:
                changes["u"] = parse_floats(section.pop("u"))
            if "scales" in section:
                changes["scales"] = parse_floats(section.pop("scales"))
            if "periods" in section:
                changes["periods"] = int(section.pop("periods"))
            if "seed" in section:
                changes["seed"] = int(section.pop("seed"))
            _no_leftovers("perturbation", section)
        if parser.has_section("scan"):
            section = dict(parser["scan"])
            if "grid" in section:
                changes["grid"] = tuple(ScanAxis.parse(a) for a in section.pop("grid").split(";") if a.strip())
            if "workers" in section:
                changes["workers"] = int(section.pop("workers"))
            _no_leftovers("scan", section)
        if parser.has_section("output"):
            section = dict(parser["output"])
            if "json" in section:
                changes["out_json"] = section.pop("json")
            if "csv" in section:
                changes["out_csv"] = section.pop("csv")
            _no_leftovers("output", section)
        return replace(self, **changes)


def _no_leftovers(name: str, section: Mapping[str, str]) -> None:
    if section:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(section))}")


def _section(kind: type, current: Any, section: Mapping[str, str]) -> Any:
    types = {f.name: f.type for f in fields(kind)}
    values: Dict[str, Any] = {}
    for name, text in section.items():
        if name not in types:
            raise ConfigError(f"unknown key {name!r} for {kind.__name__}")
        default = getattr(current, name)
        if isinstance(default, bool):
            values[name] = text.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(default, int):
            values[name] = int(text)
        elif isinstance(default, float):
            values[name] = float(text)
        else:
            values[name] = text.strip()
    return replace(current, **values)


def preset_names() -> List[str]:
    return sorted(
        Path(entry.name).stem
        for entry in resources.files(__package__).joinpath(PRESETS).iterdir()
        if entry.name.endswith(".ini")
    )


def load_run_config(source: Optional[str]) -> RunConfig:
    """Defaults, overlaid with a run file path or the name of a bundled preset."""
    if source is None:
        return RunConfig()
    path = Path(source)
    if path.is_file():
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e}") from e
        LOG.info("run file %s", path)
        return RunConfig.loads(text, source=str(path))
    preset = resources.files(__package__).joinpath(PRESETS).joinpath(f"{source}.ini")
    if not preset.is_file():
        raise ConfigError(
            f"{source!r} is neither a file nor a preset; presets: {', '.join(preset_names())}"
        )
    LOG.info("preset %s", source)
    return RunConfig.loads(preset.read_text(encoding="utf-8"), source=source)

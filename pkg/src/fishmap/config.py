"""Run configuration: every tunable in one place, validated, hashed and echoed into outputs."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .classify import AMBIGUOUS_POLICIES
from .coverage import CoverageConfig
from .grid import GridSpec
from .mixture import EmConfig
from .tracks import DECIMATE_BEFORE_FIT, DecimationConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # ingest
    strict: bool = False
    # tracks
    window: int = 300
    decimate_before_fit: bool = DECIMATE_BEFORE_FIT
    # mixture
    min_speed: float = 0.5
    min_samples: int = 50
    max_iter: int = 500
    rel_tol: float = 1e-8
    var_floor: float = 1e-4
    em_seed: int = 0
    n_restarts: int = 1
    # classify
    k: float = 2.0
    ambiguous_policy: str = "include"
    band_applies_to_filtered: bool = False
    # grid
    grid_lat0: float = 52.0
    grid_lon0: float = 10.0
    false_easting: float = 4321000.0
    false_northing: float = 3210000.0
    cell_size: float = 1000.0
    sphere_radius: float = 6371007.181
    quantum: float = 5.0
    # coverage
    cruise_min: float = 8.0
    max_gap: int = 21600
    low_coverage: float = 0.5
    # synthetic scenarios
    seed: int = 0

    def __post_init__(self):
        try:
            self.decimation()
            self.em()
            self.grid()
            self.coverage()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.k >= 0:
            raise ConfigError(f"k must be >= 0, got {self.k!r}")
        if self.ambiguous_policy not in AMBIGUOUS_POLICIES:
            raise ConfigError(f"ambiguous_policy must be one of {AMBIGUOUS_POLICIES}")
        if self.quantum * 60.0 != self.window:
            raise ConfigError(
                f"quantum ({self.quantum} min) must equal the decimation window ({self.window} s)"
            )
        if not 0.0 <= self.low_coverage <= 1.0:
            raise ConfigError("low_coverage must be in [0, 1]")

    def decimation(self) -> DecimationConfig:
        return DecimationConfig(window=self.window)

    def em(self) -> EmConfig:
        return EmConfig(
            min_speed=self.min_speed,
            min_samples=self.min_samples,
            max_iter=self.max_iter,
            rel_tol=self.rel_tol,
            var_floor=self.var_floor,
            seed=self.em_seed,
            n_restarts=self.n_restarts,
        )

    def grid(self) -> GridSpec:
        return GridSpec(
            self.grid_lat0,
            self.grid_lon0,
            self.false_easting,
            self.false_northing,
            self.cell_size,
            self.sphere_radius,
        )

    def coverage(self) -> CoverageConfig:
        return CoverageConfig(self.cruise_min, self.max_gap, self.decimation())

    def items(self) -> list[tuple[str, object]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def canonical(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in sorted(self.items()))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def header_lines(self) -> list[str]:
        """Provenance lines written at the top of every output file."""
        lines = [
            f"# fishmap {__version__}",
            f"# config_hash={self.config_hash()}",
            f"# k={_fmt(self.k)} window={self.window} quantum_min={_fmt(self.quantum)}",
            f"# grid={self.grid().describe()}",
        ]
        lines += [f"# config.{k}={_fmt(v)}" for k, v in self.items()]
        return lines

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(name: str, raw: str):
    field_types = {f.name: f.type for f in fields(RunConfig)}
    if name not in field_types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = field_types[name]
    value = raw.strip()
    try:
        if kind == "bool":
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {raw!r} as {kind}") from None
    return value


def parse_config_text(text: str) -> dict[str, object]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    values: dict[str, object] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip().replace("-", "_")
        values[key] = _coerce(key, raw)
    return values


def load_config(path: str | Path | None = None, overrides: dict[str, object] | None = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional file, then explicit overrides."""
    values: dict[str, object] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
        values.update(parse_config_text(text))
    for key, value in (overrides or {}).items():
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    return RunConfig(**values)


def field_types() -> dict[str, str]:
    return {f.name: f.type for f in fields(RunConfig)}

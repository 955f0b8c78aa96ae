"""
Run configuration: a flat ``key = value [unit]`` text file parsed into typed
pydantic records.

Units are explicit at this boundary (dBm, W, per_km2, dB, ...) and are
converted to SI here; nothing downstream sees boundary units.
"""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from smallcell.lib.energy_efficiency import SearchConfig
from smallcell.lib.errors import ConfigError, UnitConversionError
from smallcell.lib.logging_config import get_logger
from smallcell.lib.network_model import NetworkParams, PowerMode, convert_units
from smallcell.lib.parallel import default_workers
from smallcell.lib.rate_analysis import QuadratureConfig
from smallcell.simulation.montecarlo import SimConfig

logger = get_logger(__name__)

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir, os.pardir))
DEFAULT_CONFIG_PATH = os.path.join(PROJECT_ROOT, "data", "paper_s5.cfg")


class ValidationTolerances(BaseModel):
    """Model tolerances added to the Monte Carlo half-width when comparing."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    void_tolerance: float = Field(default=0.02, ge=0.0, description="absolute")
    rate_tolerance: float = Field(default=0.05, ge=0.0, description="relative to the analytic value")
    on_off_rate_tolerance: float = Field(
        default=0.10, ge=0.0, description="relative; on-off rates also carry the independent-thinning approximation"
    )
    outage_tolerance: float = Field(default=0.02, ge=0.0, description="absolute")

    def rate_tolerance_for(self, mode: PowerMode) -> float:
        return self.on_off_rate_tolerance if mode is PowerMode.ON_OFF else self.rate_tolerance


class RunConfig(BaseModel):
    """Everything a command needs; densities per m^2, powers in W, thresholds linear."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    network: NetworkParams
    quadrature: QuadratureConfig = QuadratureConfig()
    search: SearchConfig = SearchConfig()
    sim: Optional[SimConfig] = None
    tolerances: ValidationTolerances = ValidationTolerances()
    lambda_u: float = Field(ge=0.0)
    outage_threshold: float = Field(default=10 ** 0.5, gt=0.0)
    reference_outage: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    mu_grid: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0], min_length=1)
    lambda_u_grid: List[float] = Field(default_factory=lambda: [k * 1e-4 for k in range(1, 11)], min_length=1)
    sweep_lambda_b_min: float = Field(default=30e-6, gt=0.0)
    sweep_lambda_b_max: float = Field(default=1000e-6, gt=0.0)
    sweep_points: int = Field(default=32, ge=1)
    fixed_load: Optional[float] = Field(default=None, gt=0.0)
    validate_mu: float = Field(default=1.0, gt=0.0)
    validate_lambda_b: Optional[float] = Field(default=None, gt=0.0)


class Unit(Enum):
    NONE = "none"
    POWER = "power"
    DENSITY = "density"
    THRESHOLD = "threshold"
    LENGTH = "length"
    PATH_LOSS = "path_loss"


_UNITS = {
    Unit.POWER: {"W", "mW", "dBm"},
    Unit.DENSITY: {"per_km2", "per_m2"},
    Unit.THRESHOLD: {"dB", "linear"},
    Unit.LENGTH: {"m"},
    Unit.PATH_LOSS: {"m^alpha"},
}
# Units that must be written out; others may be omitted
_REQUIRED_UNIT = {Unit.POWER, Unit.DENSITY, Unit.THRESHOLD}


@dataclass(frozen=True)
class _Key:
    section: str
    field: str
    kind: type
    unit: Unit = Unit.NONE
    is_list: bool = False


_KEYS: Dict[str, _Key] = {
    "alpha": _Key("network", "alpha", float),
    "path_loss_constant": _Key("network", "path_loss_constant", float, Unit.PATH_LOSS),
    "delta": _Key("network", "delta", float),
    "p_r_min": _Key("network", "p_r_min", float, Unit.POWER),
    "noise_power": _Key("network", "noise_power", float, Unit.POWER),
    "p0_circuit": _Key("network", "p0_circuit", float, Unit.POWER),
    "delta_slope": _Key("network", "delta_slope", float),
    "p_off": _Key("network", "p_off", float, Unit.POWER),
    "rel_tol": _Key("quadrature", "rel_tol", float),
    "abs_tol": _Key("quadrature", "abs_tol", float),
    "tail_epsilon": _Key("quadrature", "tail_epsilon", float),
    "grid_points": _Key("search", "grid_points", int),
    "lower_fraction": _Key("search", "lower_fraction", float),
    "rel_width": _Key("search", "rel_width", float),
    "workers": _Key("search", "workers", int),
    "simulate": _Key("run", "simulate", bool),
    "window_side": _Key("sim", "window_side", float, Unit.LENGTH),
    "target_bs_count": _Key("sim", "target_bs_count", float),
    "seed": _Key("sim", "seed", int),
    "n_realizations": _Key("sim", "n_realizations", int),
    "boundary": _Key("sim", "boundary", str),
    "guard_width": _Key("sim", "guard_width", float, Unit.LENGTH),
    "void_tolerance": _Key("tolerances", "void_tolerance", float),
    "rate_tolerance": _Key("tolerances", "rate_tolerance", float),
    "on_off_rate_tolerance": _Key("tolerances", "on_off_rate_tolerance", float),
    "outage_tolerance": _Key("tolerances", "outage_tolerance", float),
    "lambda_u": _Key("run", "lambda_u", float, Unit.DENSITY),
    "outage_threshold": _Key("run", "outage_threshold", float, Unit.THRESHOLD),
    "reference_outage": _Key("run", "reference_outage", float),
    "mu_grid": _Key("run", "mu_grid", float, is_list=True),
    "lambda_u_grid": _Key("run", "lambda_u_grid", float, Unit.DENSITY, is_list=True),
    "sweep_lambda_b_min": _Key("run", "sweep_lambda_b_min", float, Unit.DENSITY),
    "sweep_lambda_b_max": _Key("run", "sweep_lambda_b_max", float, Unit.DENSITY),
    "sweep_points": _Key("run", "sweep_points", int),
    "fixed_load": _Key("run", "fixed_load", float),
    "validate_mu": _Key("run", "validate_mu", float),
    "validate_lambda_b": _Key("run", "validate_lambda_b", float, Unit.DENSITY),
}

_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class RawEntry:
    text: str
    line: Optional[int]


def parse_config_text(text: str) -> Dict[str, RawEntry]:
    """Split a config file into raw entries keyed by name, rejecting unknown keys."""
    entries: Dict[str, RawEntry] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ConfigError(f"expected 'key = value [unit]', got {raw.strip()!r}", line=lineno)
        key, value = m.group(1), m.group(2)
        if key not in _KEYS:
            raise ConfigError("unknown key", field=key, line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {entries[key].line})", field=key, line=lineno)
        entries[key] = RawEntry(value, lineno)
    return entries


def parse_overrides(pairs: Iterable[str]) -> Dict[str, RawEntry]:
    """``KEY=VALUE [unit]`` strings from the command line."""
    entries: Dict[str, RawEntry] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like KEY=VALUE, got {pair!r}")
        key, value = (part.strip() for part in pair.split("=", 1))
        if key not in _KEYS:
            raise ConfigError("unknown key", field=key)
        entries[key] = RawEntry(value, None)
    return entries


def _split_unit(text: str, schema: _Key, key: str, line: Optional[int]) -> Tuple[str, Optional[str]]:
    if schema.unit is Unit.NONE:
        return text, None
    parts = text.rsplit(None, 1)
    if len(parts) == 2 and not _looks_numeric(parts[1]):
        value, unit = parts[0].rstrip(", "), parts[1]
        if unit not in _UNITS[schema.unit]:
            raise ConfigError(f"unit '{unit}' not allowed; expected one of {sorted(_UNITS[schema.unit])}", field=key, line=line)
        return value, unit
    if schema.unit in _REQUIRED_UNIT:
        raise ConfigError(f"missing unit; expected one of {sorted(_UNITS[schema.unit])}", field=key, line=line)
    return text, None


def _looks_numeric(token: str) -> bool:
    try:
        float(token.rstrip(","))
    except ValueError:
        return False
    return True


def _to_si(value: float, schema: _Key, unit: Optional[str]) -> float:
    if unit is None:
        return value
    if schema.unit is Unit.POWER:
        return convert_units(value, unit, "W")
    if schema.unit is Unit.DENSITY:
        return convert_units(value, unit, "per_m2")
    if schema.unit is Unit.THRESHOLD:
        return 10.0 ** (value / 10.0) if unit == "dB" else value
    return value


def _scalar(token: str, schema: _Key, key: str, line: Optional[int]):
    token = token.strip()
    try:
        if schema.kind is bool:
            lowered = token.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(token)
        if schema.kind is int:
            return int(token)
        if schema.kind is float:
            value = float(token)
            if not math.isfinite(value):
                raise ValueError(token)
            return value
        return token
    except ValueError:
        raise ConfigError(f"cannot read {token!r} as {schema.kind.__name__}", field=key, line=line) from None


def _convert(key: str, entry: RawEntry):
    schema = _KEYS[key]
    text, unit = _split_unit(entry.text, schema, key, entry.line)
    try:
        if schema.is_list:
            tokens = [t for t in text.split(",") if t.strip()]
            if not tokens:
                raise ConfigError("empty list", field=key, line=entry.line)
            return [_to_si(_scalar(t, schema, key, entry.line), schema, unit) for t in tokens]
        value = _scalar(text, schema, key, entry.line)
        return _to_si(value, schema, unit) if schema.kind is float else value
    except UnitConversionError as exc:
        raise ConfigError(str(exc), field=key, line=entry.line) from None


def build_run_config(entries: Mapping[str, RawEntry]) -> RunConfig:
    """Assemble and validate a RunConfig; pydantic failures become ConfigError naming the field."""
    sections: Dict[str, Dict[str, object]] = {"network": {}, "quadrature": {}, "search": {}, "sim": {}, "tolerances": {}, "run": {}}
    for key, entry in entries.items():
        schema = _KEYS[key]
        sections[schema.section][schema.field] = _convert(key, entry)

    run = sections.pop("run")
    simulate = run.pop("simulate", None)
    sim_fields = sections.pop("sim")
    if simulate is None:
        simulate = bool(sim_fields)
    workers = sections["search"].setdefault("workers", default_workers())
    sim_fields.setdefault("workers", workers)
    payload: Dict[str, object] = dict(run)
    payload["network"] = sections["network"]
    for name in ("quadrature", "search", "tolerances"):
        if sections[name]:
            payload[name] = sections[name]
    if simulate:
        payload["sim"] = sim_fields
    if "lambda_u" not in payload:
        raise ConfigError("lambda_u is required", field="lambda_u")

    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = [str(p) for p in first["loc"]]
        field = loc[-1] if loc else None
        line = entries[field].line if field in entries else None
        raise ConfigError(f"{'.'.join(loc)}: {first['msg']}", field=field, line=line) from None


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, RawEntry]] = None) -> RunConfig:
    """Read a config file (default: the shipped parameter set) and apply overrides on top."""
    config_path = path or DEFAULT_CONFIG_PATH
    logger.info("Loading config", extra={"path": config_path, "overrides": sorted((overrides or {}).keys())})
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            entries = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {config_path}: {exc}") from None
    entries.update(overrides or {})
    return build_run_config(entries)

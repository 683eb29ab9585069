"""
Configuration loading for cavity2sat.

Defaults live in config/defaults.json at the project root. A different file can
be selected with CAVITY2SAT_CONFIG; CLI flags are merged on top as overrides.
"""

import json
import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from .errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_ENV = "CAVITY2SAT_CONFIG"
THREADS_ENV = "CAVITY2SAT_THREADS"
DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "defaults.json"

# (section, key) in the JSON file -> Settings field
_JSON_LAYOUT = {
    ("population", "size"): "pop_size",
    ("population", "iterations"): "iterations",
    ("population", "chunk_size"): "chunk_size",
    ("bethe", "mc_samples"): "mc_samples",
    ("bethe", "grid"): "grid",
    ("counting", "component_cap"): "component_cap",
    ("tree", "max_nodes"): "max_tree_nodes",
    ("cdf", "resolution"): "cdf_resolution",
    ("cdf", "figure_densities"): "figure_densities",
    ("runtime", "threads"): "threads",
    ("runtime", "log_level"): "log_level",
}


@dataclass(frozen=True)
class Settings:
    """Resolved run settings"""
    pop_size: int = 200_000
    iterations: int = 24
    chunk_size: int = 16_384
    mc_samples: int = 1_000_000
    grid: str = "0.1:1.9:0.1"
    component_cap: int = 30
    max_tree_nodes: int = 10_000_000
    cdf_resolution: int = 200
    figure_densities: Tuple[float, ...] = (1.1, 1.3, 1.5, 1.7, 1.9)
    threads: int = 1
    log_level: str = "INFO"

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _flatten(raw: Mapping[str, Any], source: str) -> Dict[str, Any]:
    flat = {}
    for section, body in raw.items():
        if not isinstance(body, Mapping):
            raise ConfigError(f"{source}: section '{section}' must be an object")
        for key, value in body.items():
            name = _JSON_LAYOUT.get((section, key))
            if name is None:
                raise ConfigError(f"{source}: unknown setting '{section}.{key}'")
            flat[name] = value
    return flat


def _coerce(values: Dict[str, Any]) -> Dict[str, Any]:
    known = {f.name: f for f in fields(Settings)}
    out = {}
    for name, value in values.items():
        if name not in known:
            raise ConfigError(f"unknown setting '{name}'")
        default = getattr(Settings, name)
        try:
            if isinstance(default, tuple):
                out[name] = tuple(float(v) for v in value)
            elif isinstance(default, bool):
                out[name] = bool(value)
            elif isinstance(default, int):
                out[name] = int(value)
            else:
                out[name] = type(default)(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"setting '{name}' has invalid value {value!r}: {e}")
    return out


def load_settings(path: Optional[os.PathLike] = None,
                  overrides: Optional[Mapping[str, Any]] = None) -> Settings:
    """Load settings from JSON, then apply overrides (None values are ignored)"""
    config_path = Path(path or os.environ.get(CONFIG_ENV) or DEFAULT_CONFIG_PATH)
    values: Dict[str, Any] = {}

    if config_path.exists():
        try:
            with open(config_path, 'r') as f:
                raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path}: invalid JSON ({e})")
        values.update(_flatten(raw, str(config_path)))
        logger.debug(f"Loaded settings from {config_path}")
    elif path is not None:
        raise ConfigError(f"config file not found: {config_path}")

    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    coerced = _coerce(values)
    explicit = overrides.get("threads") if overrides else None
    coerced["threads"] = resolve_threads(explicit, coerced.get("threads", Settings.threads))
    settings = replace(Settings(), **coerced)
    if settings.component_cap < 1:
        raise ConfigError(f"component_cap must be >= 1 (got {settings.component_cap})")
    return settings


def resolve_threads(explicit: Optional[int] = None, default: int = 1) -> int:
    """Explicit value, else CAVITY2SAT_THREADS, else the configured default"""
    if explicit is not None:
        value = explicit
    else:
        try:
            value = int(os.environ.get(THREADS_ENV, default))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer")
    if value < 1:
        raise ConfigError(f"threads must be >= 1 (got {value})")
    return value

"""INI-style run configuration.

Sections map onto dataclass fields by name::

    [compare]
    trials = 10000
    sigma_fa_deg = 6.5

    [simulate]
    mode = rover
    localization = lidar

    [world]
    camera_height_mm = 650
    user_distance_range_mm = 1500, 3000

    [pipeline]
    k = 3
    settle_frames = 5

Values from the file are overridden by explicit command-line flags.
"""

from __future__ import annotations

import configparser
import dataclasses
from enum import Enum


class ConfigError(ValueError):
    pass


def load_ini(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cp


def section(cp: configparser.ConfigParser | None, name: str) -> dict[str, str]:
    if cp is None or not cp.has_section(name):
        return {}
    return dict(cp.items(name))


def coerce(raw: str, like, key: str = "value"):
    """Parse ``raw`` into the type of the example value ``like``."""
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(like, Enum):
            return type(like)(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def apply_overrides(obj, values: dict[str, str], where: str = "config"):
    """Return a copy of dataclass ``obj`` with string ``values`` coerced onto its fields."""
    names = {f.name for f in dataclasses.fields(obj)}
    changes = {}
    for key, raw in values.items():
        if key not in names:
            raise ConfigError(f"[{where}] unknown key {key!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            raise ConfigError(f"[{where}] {key!r} is not a scalar setting")
        changes[key] = coerce(raw, current, f"[{where}] {key}")
    try:
        return dataclasses.replace(obj, **changes)
    except ValueError as exc:
        raise ConfigError(f"[{where}] {exc}") from None

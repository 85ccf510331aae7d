"""JSON run/sweep configuration files and ``--set key=value`` overrides.

A run file is a JSON object holding ``schema_version`` plus any subset of
the ``SchwarzConfig`` fields; missing fields take their documented defaults
and unknown keys are rejected.  A sweep file additionally carries the grid
axes (see ``SWEEP_KEYS``) and a ``base`` object of run fields.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import MISSING, fields
from pathlib import Path

from .schwarz import SchwarzConfig

__all__ = [
    "SCHEMA_VERSION",
    "SEED_ENV",
    "ConfigError",
    "load_document",
    "parse_override",
    "apply_overrides",
    "build_run_config",
    "build_sweep_grid",
]

SCHEMA_VERSION = 1
SEED_ENV = "SCHWARZ_PINN_SEED"
SWEEP_KEYS = ("n_d", "p_o", "dbc_modes", "data", "pe", "seeds", "prune_seeds", "base")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


def _defaults():
    out = {}
    for f in fields(SchwarzConfig):
        out[f.name] = f.default if f.default is not MISSING else f.default_factory()
    return out


def load_document(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if "schema_version" not in doc:
        raise ConfigError("schema_version: required field missing", "schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: unsupported version {doc['schema_version']!r} "
            f"(expected {SCHEMA_VERSION})",
            "schema_version",
        )
    return doc


def _bare_list(text):
    inner = text.strip()[1:-1].strip()
    if not inner:
        return []
    return [_parse_value(part.strip()) for part in inner.split(",")]


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "'\"":
        return _parse_value(t[1:-1])
    if t.startswith("[") and t.endswith("]"):
        return _bare_list(t)
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    return t


def parse_override(item: str):
    """``"pe=1e6"`` -> ``("pe", 1000000.0)``; values are JSON or bare words."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, _, text = item.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"override {item!r} has an empty key")
    return key, _parse_value(text)


def apply_overrides(doc: dict, overrides) -> dict:
    out = dict(doc)
    for item in overrides or ():
        key, value = parse_override(item) if isinstance(item, str) else item
        out[key] = value
    return out


def _coerce(name, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false, got {value!r}", name)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected an integer, got {value!r}", name)
        if isinstance(value, float) and not (math.isfinite(value) and value.is_integer()):
            raise ConfigError(f"{name}: expected an integer, got {value!r}", name)
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}", name)
        return float(value)
    if isinstance(default, list):
        if name == "solvers" and isinstance(value, str):
            return [value]
        if not isinstance(value, list):
            raise ConfigError(f"{name}: expected a list, got {value!r}", name)
        return list(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{name}: expected a string, got {value!r}", name)
    return value


def build_run_config(doc: dict | None = None, overrides=(), env=None) -> SchwarzConfig:
    """Validate a run document (plus overrides) into a ``SchwarzConfig``.

    ``seed`` falls back to ``$SCHWARZ_PINN_SEED`` when neither the file nor
    an override sets it.
    """
    env = os.environ if env is None else env
    doc = apply_overrides(doc or {"schema_version": SCHEMA_VERSION}, overrides)
    defaults = _defaults()
    values = {}
    for key, value in doc.items():
        if key == "schema_version":
            continue
        if key not in defaults:
            raise ConfigError(f"{key}: unknown configuration key", key)
        values[key] = _coerce(key, value, defaults[key])
    if "seed" not in values and env.get(SEED_ENV):
        try:
            values["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"seed: {SEED_ENV}={env[SEED_ENV]!r} is not an integer", "seed") from None
    try:
        return SchwarzConfig(**values)
    except ValueError as exc:
        msg = str(exc)
        raise ConfigError(msg, msg.split(":", 1)[0]) from None


def build_sweep_grid(doc: dict, overrides=(), env=None):
    """Validate a sweep document into a ``SweepGrid``."""
    from .experiments import SweepGrid

    doc = apply_overrides(doc, overrides)
    kwargs = {}
    for key, value in doc.items():
        if key == "schema_version":
            continue
        if key not in SWEEP_KEYS:
            raise ConfigError(f"{key}: unknown sweep key", key)
        kwargs[key] = value
    base = kwargs.get("base", {})
    if not isinstance(base, dict):
        raise ConfigError("base: expected an object of run fields", "base")
    # validate base fields by building one representative run config
    build_run_config({"schema_version": SCHEMA_VERSION, **base}, env=env)
    env = os.environ if env is None else env
    if "seeds" not in kwargs and env.get(SEED_ENV):
        try:
            first = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"seeds: {SEED_ENV}={env[SEED_ENV]!r} is not an integer", "seeds") from None
        kwargs["seeds"] = [first, first + 1, first + 2]
    try:
        return SweepGrid(**kwargs)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        raise ConfigError(msg, msg.split(":", 1)[0]) from None

"""JSON run configuration: schema, loading and checks.

A configuration is a single JSON object. Unknown keys are rejected at every
level. Relative output paths are resolved against the directory of the
configuration file.

Example::

    {
      "model": {"name": "cosserat", "params": {"mu0": 1.0}, "grid": {"n": 8, "h": 0.1111111111111111}},
      "dt": 0.001, "T": 1.0, "scheme": "midpoint",
      "forcing": {"kind": "gaussian_pulse", "block": "v", "onset": 0.3, "center": 0.4, "width": 0.02},
      "outputs": {"energy_csv": "energy.csv", "report_json": "report.json"},
      "rho": 1.0
    }
"""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path

import jsonschema

from .evolution import SCHEMES
from .reduction import ACTIONS

__all__ = ["ConfigError", "SCHEMA", "load_config", "check_config", "require", "resolve_output"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n"],
    "properties": {"n": {"type": "integer", "minimum": 2}, "h": _POS},
}

_FORCING = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["gaussian_pulse", "constant", "zero"]},
        "block": {"type": "string"},
        "component": {"type": "integer", "minimum": 0},
        "onset": {"type": "number", "minimum": 0},
        "center": _NUM,
        "width": _POS,
        "amplitude": _NUM,
        "spatial_width": _POS,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "microsolids configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"type": "string"},
                "params": {"type": "object"},
                "grid": _GRID,
            },
        },
        "dt": _POS,
        "T": _POS,
        "scheme": {"enum": list(SCHEMES)},
        "forcing": _FORCING,
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "energy_csv": {"type": "string"},
                "report_json": {"type": "string"},
                "snapshots": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["every", "dir"],
                    "properties": {
                        "every": {"type": "integer", "minimum": 1},
                        "dir": {"type": "string"},
                        "format": {"enum": ["binary", "csv"]},
                    },
                },
            },
        },
        "rho": _POS,
        "force": {"type": "boolean"},
        "edge": {
            "type": "object",
            "additionalProperties": False,
            "required": ["from"],
            "properties": {
                "from": {"type": "string"},
                "to": {"type": "string"},
                "actions": {
                    "type": "array",
                    "items": {
                        "oneOf": [
                            {"enum": list(ACTIONS)},
                            {"type": "array", "items": {"type": "string"}, "minItems": 1, "maxItems": 2},
                        ]
                    },
                },
                "params": {"type": "object"},
                "grid": _GRID,
                "dynamics": {"type": "boolean"},
            },
        },
    },
}


def load_config(path) -> dict:
    """Read, schema-check and annotate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    cfg = check_config(cfg)
    cfg["_base"] = str(path.resolve().parent)
    return cfg


def check_config(cfg) -> dict:
    """Schema validation plus the cross-field checks; returns a copy."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg = copy.deepcopy(cfg)
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    if "dt" in cfg or "T" in cfg:
        if "dt" not in cfg or "T" not in cfg:
            raise ConfigError("dt and T must be given together")
        dt, T = cfg["dt"], cfg["T"]
        if not T > dt:
            raise ConfigError(f"need T > dt, got T={T}, dt={dt}")
        n = round(T / dt)
        if abs(n * dt - T) > 1e-9 * T:
            raise ConfigError(f"T={T} is not an integer multiple of dt={dt}")
        onset = cfg.get("forcing", {}).get("onset", 0.0)
        if not 0.0 <= onset < T:
            raise ConfigError(f"forcing onset must lie in [0, T), got {onset}")
    f = cfg.get("forcing")
    if f and f["kind"] != "zero" and "block" not in f:
        raise ConfigError(f"forcing kind {f['kind']!r} needs a target block")
    if f and f["kind"] == "gaussian_pulse":
        onset = f.get("onset", 0.0)
        if "center" in f and not f["center"] > onset:
            raise ConfigError("pulse center must lie after the onset")
    for k in ("dt", "T", "rho"):
        if k in cfg and not math.isfinite(cfg[k]):
            raise ConfigError(f"{k} must be finite")
    return cfg


def require(cfg: dict, *keys: str):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")


def resolve_output(cfg: dict, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else Path(cfg.get("_base", ".")) / p

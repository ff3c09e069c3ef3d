"""JSON run configurations: schemas, validation with located messages, defaults."""

from __future__ import annotations

import copy
import json
from importlib import resources

import jsonschema

from .errors import ConfigError

COMMANDS = ("simulate", "chern-sweep", "bhz", "floquet", "array", "noise-mc")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

DRIVE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": ["experiment", "none"]},
        "eta": _pos,
        "omega1": _pos,
        "omega2": _pos,
        "phi1": _num,
        "phi2": _num,
        "M": _num,
        "ramp_duration": _nonneg,
        "t_total": _num,
        "dt": _pos,
    },
}

NOISE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "realizations": {"type": "integer", "minimum": 2},
    },
    "required": ["beta", "realizations"],
}

COMMON = {
    "command": {"enum": list(COMMANDS)},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "threads": {"type": "integer", "minimum": 1},
    "units": {"enum": ["dimensionless", "physical"]},
    "out": {"type": "string"},
}

_n_samples = {"type": "integer", "minimum": 2}
_window = {"enum": ["exclude_transient", "full"]}


def _schema(props: dict, required=()) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "properties": {**COMMON, **props},
        "required": list(required),
    }


SCHEMAS = {
    "simulate": _schema(
        {
            "drive": DRIVE,
            "n_samples": _n_samples,
            "sampling": {"enum": ["midpoint", "left", "cf4"]},
            "band": {"enum": ["upper", "lower"]},
            "fit_window": _window,
            "tomography": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "shots": {"type": "integer", "minimum": 1},
                    "frame": {"enum": ["rotating", "lab"]},
                },
                "required": ["shots"],
            },
        },
        ["drive"],
    ),
    "chern-sweep": _schema(
        {
            "drive": DRIVE,
            "M_values": {"type": "array", "items": _num, "minItems": 1},
            "n_samples": _n_samples,
            "fit_window": _window,
            "bhz_grid": {"type": "integer", "minimum": 4},
            "noise": {"anyOf": [NOISE, {"type": "null"}]},
        },
        ["M_values"],
    ),
    "bhz": _schema(
        {
            "M": _num,
            "B": _num,
            "grid_n": {"type": "integer", "minimum": 4},
            "curvature_grid": {"type": "integer", "minimum": 4},
        },
        ["M"],
    ),
    "floquet": _schema(
        {
            "drive": DRIVE,
            "radius": {"type": "integer", "minimum": 1, "maximum": 12},
            "band_checks": {"type": "integer", "minimum": 1},
            "tolerance": _pos,
        },
        ["drive"],
    ),
    "array": _schema(
        {
            "lattice": {"type": "object"},
            "initial_basis_state": {"type": "integer", "minimum": 0},
            "t_total": _pos,
            "dt": _pos,
            "n_samples": _n_samples,
            "cache_tol": {"anyOf": [_pos, {"type": "null"}]},
        },
        ["lattice", "t_total", "dt"],
    ),
    "noise-mc": _schema(
        {
            "drive": DRIVE,
            "n_samples": _n_samples,
            "fit_window": _window,
            "heuristic": NOISE,
            "gaussian": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "sigma_noise": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                    "draws": {"type": "integer", "minimum": 1},
                },
                "required": ["sigma_noise", "draws"],
            },
        },
        ["drive", "heuristic"],
    ),
}


def _locate(text: str, path) -> str:
    """Best-effort ``line N`` for the deepest string key of a JSON path."""
    keys = [k for k in path if isinstance(k, str)]
    if not keys or text is None:
        return ""
    needle = json.dumps(keys[-1]) + ":"
    for lineno, line in enumerate(text.splitlines(), 1):
        if needle in line.replace('" :', '":'):
            return f"line {lineno}: "
    return ""


def validate(command: str, cfg: dict, text: str | None = None) -> dict:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for err in errors:
            path = list(err.absolute_path)
            where = ".".join(str(p) for p in path) or "<root>"
            # unknown keys are reported on the parent object; point at the key itself
            if err.validator == "additionalProperties":
                extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
                where_line = _locate(text, path + extra[:1])
            else:
                where_line = _locate(text, path)
            msgs.append(f"{where_line}{where}: {err.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(msgs))
    return cfg


def parse(command: str, text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return validate(command, cfg, text)


def load(command: str, path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(command, text)


def default_config(command: str) -> dict:
    name = command.replace("-", "_") + ".json"
    text = resources.files("topofreq").joinpath("configs", name).read_text()
    return copy.deepcopy(parse(command, text))

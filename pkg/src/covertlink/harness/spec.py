"""Experiment description: JSON config, schema validation, overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

KINDS = ("baseline_per", "per_vs_sir", "covert_ber_nocancel", "covert_ber_cancel",
         "ota_replay", "mask_check")

# 802.11 20 MHz transmit mask: (offset MHz, dBr), linear between points
DEFAULT_MASK = [[9.0, 0.0], [11.0, -20.0], [20.0, -28.0], [30.0, -40.0]]

_number_grid = {"type": "array", "items": {"type": "number"}, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "covertlink experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "name": {"type": "string", "minLength": 1},
        "mcs": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 7},
                "minItems": 1},
        "snr_db": _number_grid,
        "sir_db": _number_grid,
        "noiseless": {"type": "boolean", "description": "add a no-noise curve"},
        "packets_per_point": {"type": "integer", "minimum": 1},
        "psdu_octets": {"type": "integer", "minimum": 5, "maximum": 4095},
        "seed": {"type": "integer", "minimum": 0, "maximum": 18446744073709551615},
        "decoder": {"enum": ["hard", "soft"]},
        "cancel_mode": {"enum": ["forward", "inverse"]},
        "cancel_method": {"enum": ["per_bin", "convolve"]},
        "covert_start_offset": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "taps": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "array", "items": {"type": "number"},
                              "minItems": 2, "maxItems": 2},
                    "description": "fixed multipath taps as [re, im] pairs",
                },
                "cfo_hz": {"type": "number"},
                "cfo_hz_max": {"type": "number", "minimum": 0,
                               "description": "draw CFO uniformly in +-cfo_hz_max per packet"},
                "timing_offset": {"type": "integer", "minimum": 0},
                "multipath": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n_taps_min": {"type": "integer", "minimum": 1},
                        "n_taps_max": {"type": "integer", "minimum": 1},
                        "decay_db_per_tap": {"type": "number", "minimum": 0},
                        "spacing": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "ota": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "recordings": {"type": "array", "items": {"type": "string"},
                               "description": "IQ files; empty means synthesize"},
                "n_recordings": {"type": "integer", "minimum": 1},
                "sample_rate_hz": {"type": "number", "exclusiveMinimum": 0},
                "snr_db_min": {"type": "number"},
                "snr_db_max": {"type": "number"},
                "cfo_hz_max": {"type": "number", "minimum": 0},
                "n_taps_min": {"type": "integer", "minimum": 1},
                "n_taps_max": {"type": "integer", "minimum": 1},
                "decay_db_per_tap": {"type": "number", "minimum": 0},
                "tap_spacing": {"type": "integer", "minimum": 1},
            },
        },
        "mask": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "breakpoints": {
                    "type": "array", "minItems": 2,
                    "items": {"type": "array", "items": {"type": "number"},
                              "minItems": 2, "maxItems": 2},
                    "description": "[offset MHz, dBr] pairs",
                },
                "nfft": {"type": "integer", "minimum": 16},
                "oversample": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "csv": {"type": "string"},
                "svg": {"type": "string"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentSpec:
    kind: str
    name: str = ""
    mcs: list = field(default_factory=lambda: [7])
    snr_db: list = field(default_factory=lambda: [23.0])
    sir_db: list = field(default_factory=lambda: [30.0])
    noiseless: bool = False
    packets_per_point: int = 200
    psdu_octets: int = 1000
    seed: int = 0
    decoder: str = "hard"
    cancel_mode: str = "forward"
    cancel_method: str = "per_bin"
    covert_start_offset: int = 320
    workers: int = 1
    channel: dict = field(default_factory=dict)
    ota: dict = field(default_factory=dict)
    mask: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            self.name = self.kind
        self.validate()

    def validate(self):
        _check_schema(self.to_dict())
        for key in ("snr_db", "sir_db"):
            grid = getattr(self, key)
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(f"{key} grid must be strictly increasing")
        if any(b <= a for a, b in zip(self.mcs, self.mcs[1:])):
            raise ConfigError("mcs list must be strictly increasing")
        for block, lo, hi in ((self.channel.get("multipath", {}), "n_taps_min", "n_taps_max"),
                              (self.ota, "n_taps_min", "n_taps_max"),
                              (self.ota, "snr_db_min", "snr_db_max")):
            if lo in block and hi in block and block[hi] < block[lo]:
                raise ConfigError(f"{hi} must be >= {lo}")

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: dict) -> "ExperimentSpec":
        d = self.to_dict()
        for key, value in overrides.items():
            _set_path(d, key, value)
        return from_dict(d)


def _check_schema(d: dict):
    try:
        jsonschema.validate(d, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def _set_path(d: dict, dotted: str, value):
    parts = dotted.split(".")
    node = d
    for p in parts[:-1]:
        if p not in SCHEMA["properties"] and node is d:
            raise ConfigError(f"unknown key {dotted!r}")
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted!r} does not name a nested field")
    if node is d and parts[-1] not in SCHEMA["properties"]:
        raise ConfigError(f"unknown key {dotted!r}")
    node[parts[-1]] = value


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value parsed as JSON when possible.

    ``snr_db=21,23,25`` is shorthand for a list of numbers.
    """
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        if "," in raw:
            try:
                value = [json.loads(v) for v in raw.split(",")]
            except json.JSONDecodeError:
                value = raw
        else:
            value = raw
    if key in ("snr_db", "sir_db", "mcs") and not isinstance(value, list):
        value = [value]
    return key, value


def from_dict(d: dict) -> ExperimentSpec:
    d = copy.deepcopy(d)
    _check_schema(d)
    return ExperimentSpec(**d)


def load_spec(path, overrides: dict | None = None) -> ExperimentSpec:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    for key, value in (overrides or {}).items():
        _set_path(d, key, value)
    return from_dict(d)


def write_schema(path):
    Path(path).write_text(json.dumps(SCHEMA, indent=2) + "\n")

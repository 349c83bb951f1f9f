"""JSON run configuration: schema validation and object construction."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import jsonschema

from .aoi_cost import AoiCostModel
from .cost_dist import CostDistribution
from .errors import ConfigError
from .mech_multi import Source, SourceProfile
from .mech_single import DEFAULT_FMAX

_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIRS = {"type": "array", "minItems": 2,
          "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}}

AOI_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["kind", "alpha"], "additionalProperties": False,
         "properties": {"kind": {"const": "power"}, "alpha": _POS}},
        {"type": "object", "required": ["kind", "points"], "additionalProperties": False,
         "properties": {"kind": {"const": "tabulated"}, "points": _PAIRS}},
    ]
}

DIST_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["kind", "c_low", "c_high"], "additionalProperties": False,
         "properties": {"kind": {"const": "uniform"}, "c_low": {"type": "number", "minimum": 0},
                        "c_high": _POS}},
        {"type": "object", "required": ["kind", "mu", "c_high"], "additionalProperties": False,
         "properties": {"kind": {"const": "trunc_exp"}, "mu": _POS, "c_high": _POS}},
        {"type": "object", "required": ["kind", "cdf_points"], "additionalProperties": False,
         "properties": {"kind": {"const": "tabulated"}, "cdf_points": _PAIRS}},
    ]
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "alpha": _POS, "c_low": {"type": "number", "minimum": 0}, "c_high": _POS, "mu": _POS,
        "f_max": _POS, "delta_q": _POS, "I": {"type": "integer", "minimum": 1},
        "mu1": _POS, "mu_other": _POS, "mu_kind": {"enum": ["scale", "rate"]},
        "intervals": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "c_high_values": {"type": "array", "items": _POS},
        "alpha_values": {"type": "array", "items": _POS},
        "I_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "mu_values": {"type": "array", "items": _POS},
        "n": {"type": "integer", "minimum": 2}, "scrambles": {"type": "integer", "minimum": 2},
        "payment_samples": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "type": "object",
    "required": ["aoi", "sources"],
    "additionalProperties": False,
    "properties": {
        "aoi": AOI_SCHEMA,
        "sources": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["dist"], "additionalProperties": False,
            "properties": {"dist": DIST_SCHEMA,
                           "f_max": {"oneOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]}}}},
        "delta_q": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "grids": {"type": "object", "additionalProperties": False, "properties": {
            "mechanism": {"type": "integer", "minimum": 2},
            "true": {"type": "integer", "minimum": 2},
            "report": {"type": "integer", "minimum": 2}}},
        "tolerances": {"type": "object", "additionalProperties": False, "properties": {
            "ic": _POS, "payment": _POS}},
        "draws": {"type": "integer", "minimum": 2},
        "experiment": EXPERIMENT_SCHEMA,
    },
}


class ConfigParseError(ConfigError):
    """Malformed JSON, with the position of the problem."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line, self.column = line, column


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", exc.lineno, exc.colno) from exc


def _validate(data, schema):
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def canonical_hash(obj):
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunConfig:
    aoi: AoiCostModel
    profile: SourceProfile
    raw: dict
    delta_q: float = 1.0
    seed: int = 0
    grids: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    draws: int = 4096
    experiment: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        _validate(data, RUN_SCHEMA)
        sources = []
        for s in data["sources"]:
            fm = s.get("f_max", DEFAULT_FMAX)
            sources.append(Source(CostDistribution.from_dict(s["dist"]),
                                  math.inf if fm == "inf" else float(fm)))
        return cls(aoi=AoiCostModel.from_dict(data["aoi"]), profile=SourceProfile(sources), raw=data,
                   delta_q=float(data.get("delta_q", 1.0)), seed=int(data.get("seed", 0)),
                   grids=dict(data.get("grids", {})), tolerances=dict(data.get("tolerances", {})),
                   draws=int(data.get("draws", 4096)), experiment=dict(data.get("experiment", {})))

    @classmethod
    def load(cls, path):
        return cls.from_dict(load_json(path))

    @property
    def sha256(self):
        return canonical_hash(self.raw)


def load_experiment_config(path):
    """Sweep settings: either a bare settings object or a run config with an ``experiment`` block."""
    data = load_json(path)
    if isinstance(data, dict) and "sources" in data:
        cfg = RunConfig.from_dict(data)
        return cfg.experiment, cfg.seed, cfg.sha256
    _validate(data, EXPERIMENT_SCHEMA)
    return data, None, canonical_hash(data)

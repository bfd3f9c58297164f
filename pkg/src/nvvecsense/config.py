"""JSON run configuration for the command-line front end.

Example::

    {
      "constants": {"gyromagnetic_ratio": 1.7608e11, "selectivity_factor": 10},
      "ensemble": {"alpha0": 0.02, "alpha1": 0.01, "gamma": 1e6,
                   "axes": {"3": {"gamma": 1.1e6}}},
      "field": {"B": [3e-8, -2e-8, 1e-8], "B_ex": [0.01, 0.02, 0.03], "rabi": 6e6},
      "protocol": {"kind": "MF_DC", "component": "x", "t": "optimal",
                   "repetitions": 1000000, "T": 1.0},
      "montecarlo": {"seed": 0, "samples": 100000},
      "output": {"dir": "out"}
    }

Scalars in the ``ensemble`` block apply to all four axes; the ``axes``
sub-block overrides single axes.  Validation collects every problem before
reporting.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .model import EnsembleParams, PhysicalConstants
from .protocols import Kind, ProtocolPlan, make_plan

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_AXIS_VALUE = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4}]}
_AXIS_KEYS = ("alpha0", "alpha1", "gamma", "gamma_prime")

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["ensemble"],
    "properties": {
        "constants": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"gyromagnetic_ratio": _POS, "zero_field_splitting": _POS,
                           "selectivity_factor": _POS},
        },
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alpha0", "alpha1", "gamma"],
            "properties": {
                **{k: _AXIS_VALUE for k in _AXIS_KEYS},
                "axes": {
                    "type": "object",
                    "propertyNames": {"enum": ["1", "2", "3", "4"]},
                    "additionalProperties": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {k: _NUM for k in _AXIS_KEYS},
                    },
                },
            },
        },
        "field": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"B": _VEC3, "B_ex": _VEC3, "B_ac": _VEC3, "omega_ac": _POS,
                           "rabi": _POS},
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": [k.value for k in Kind]},
                "component": {"enum": ["x", "y", "z"]},
                "t": {"oneOf": [{"const": "optimal"}, _POS,
                                {"type": "array", "items": _POS, "minItems": 4, "maxItems": 4}]},
                "omega_ac": _POS,
                "signs": {"type": "array", "items": {"enum": [1, -1]},
                          "minItems": 4, "maxItems": 4},
                "T": _POS,
                "repetitions": {"type": "integer", "minimum": 1},
                "trials": {"type": "integer", "minimum": 2},
                "sweep": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["parameter"],
                    "properties": {
                        "parameter": {"enum": ["t", "omega_ac"]},
                        "values": {"type": "array", "items": _POS, "minItems": 1},
                        "start": _POS, "stop": _POS,
                        "num": {"type": "integer", "minimum": 2},
                    },
                },
            },
        },
        "montecarlo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "samples": {"type": "integer", "minimum": 1},
                "schedule_samples": {"type": "integer", "minimum": 1},
                "sigma_grid": {"type": "array", "items": {"type": "number", "minimum": 0},
                               "minItems": 1},
                "modes": {"type": "array", "items": {"enum": ["dc", "ac"]}, "minItems": 1},
                "mean_delta_alpha": _POS, "std_delta_alpha": {"type": "number", "minimum": 0},
                "mean_gamma": _POS, "std_gamma": {"type": "number", "minimum": 0},
                "mean_emission": _POS,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violated constraint."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class RunConfig:
    constants: PhysicalConstants
    params: EnsembleParams
    plan: ProtocolPlan
    B: np.ndarray
    B_ex: np.ndarray | None
    B_ac: np.ndarray
    rabi: float | None
    T: float = 1.0
    repetitions: int = 1_000_000
    trials: int = 200
    sweep: dict | None = None
    montecarlo: dict = field(default_factory=dict)
    output_dir: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def signal_field(self) -> np.ndarray:
        """The field the plan senses: the AC amplitude for AC kinds."""
        return self.B_ac if self.plan.kind.is_ac else self.B

    def sweep_values(self) -> np.ndarray | None:
        if not self.sweep:
            return None
        if "values" in self.sweep:
            return np.asarray(self.sweep["values"], dtype=float)
        return np.linspace(self.sweep["start"], self.sweep["stop"], self.sweep.get("num", 101))


MC_DEFAULTS = {
    "seed": 0,
    "samples": 100_000,
    "schedule_samples": 200,
    "sigma_grid": [round(0.01 * i, 2) for i in range(11)],
    "modes": ["dc", "ac"],
    "mean_delta_alpha": 0.01,
    "std_delta_alpha": 0.001,
    "mean_gamma": 1e6,
    "std_gamma": 1e5,
    "mean_emission": 0.02,
}


def _expand_ensemble(block: dict) -> dict:
    values = {}
    for key in _AXIS_KEYS:
        if key not in block:
            continue
        v = block[key]
        values[key] = list(v) if isinstance(v, list) else [v] * 4
    follow = "gamma_prime" not in values
    values.setdefault("gamma_prime", list(values["gamma"]))
    for axis, overrides in block.get("axes", {}).items():
        for key, v in overrides.items():
            values[key][int(axis) - 1] = v
    if follow and not any("gamma_prime" in o for o in block.get("axes", {}).values()):
        # gamma_prime never given: it tracks gamma axis by axis
        values["gamma_prime"] = list(values["gamma"])
    return values


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document and build the run objects."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
              for e in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))]
    if errors:
        raise ConfigError(errors)

    constants = params = plan = None
    try:
        constants = PhysicalConstants(**doc.get("constants", {}))
    except ValueError as exc:
        errors.append(f"constants: {exc}")

    ens = _expand_ensemble(doc["ensemble"])
    try:
        params = EnsembleParams(**ens)
    except ValueError as exc:
        errors.extend(f"ensemble: {msg}" for msg in str(exc).split("; "))

    fld = doc.get("field", {})
    proto = doc.get("protocol", {})
    kind = Kind(proto.get("kind", "MF_DC"))
    omega_ac = proto.get("omega_ac", fld.get("omega_ac"))
    if params is not None:
        try:
            plan = make_plan(kind, proto.get("component", "x"), params, proto.get("t", "optimal"),
                             omega_ac=omega_ac, signs=proto.get("signs"))
        except ValueError as exc:
            errors.append(f"protocol: {exc}")

    sweep = proto.get("sweep")
    if sweep and "values" not in sweep and not ("start" in sweep and "stop" in sweep):
        errors.append("protocol/sweep: give 'values' or both 'start' and 'stop'")
    if sweep and sweep["parameter"] == "omega_ac" and not kind.is_ac:
        errors.append("protocol/sweep: omega_ac sweeps need an AC protocol kind")

    mc = {**MC_DEFAULTS, **doc.get("montecarlo", {})}
    if 0 not in mc["sigma_grid"]:
        errors.append("montecarlo/sigma_grid: must include 0")

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        constants=constants,
        params=params,
        plan=plan,
        B=np.asarray(fld.get("B", [0.0, 0.0, 0.0]), dtype=float),
        B_ex=None if "B_ex" not in fld else np.asarray(fld["B_ex"], dtype=float),
        B_ac=np.asarray(fld.get("B_ac", fld.get("B", [0.0, 0.0, 0.0])), dtype=float),
        rabi=fld.get("rabi"),
        T=proto.get("T", 1.0),
        repetitions=proto.get("repetitions", 1_000_000),
        trials=proto.get("trials", 200),
        sweep=sweep,
        montecarlo=mc,
        output_dir=doc.get("output", {}).get("dir"),
        raw=doc,
    )


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return parse_config(doc)

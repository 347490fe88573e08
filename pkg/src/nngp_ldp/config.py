"""Experiment configuration: JSON schema, validation and object construction.

A config looks like::

    {
      "kind": "lln",
      "seed": 7,
      "network": {"L": 2, "N0": 1, "precisions": [1, 1, 1], "activation": "relu"},
      "grid": {"domain": [0, 1], "n": 16},
      "params": {"Ns": [64, 256, 1024], "reps": 20}
    }

``grid`` is either a box (``domain``, ``n``, optional ``rule``) or explicit
``nodes`` and ``weights``. Validation happens before any sampling and
reports the offending field.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import jsonschema
import numpy as np

from .activations import get_activation
from .chain import NetworkConfig
from .errors import ConfigError
from .operators import Grid, Tolerances, make_grid
from .rng import SeedSpec

KINDS = ("simulate", "nngp", "lln", "rate", "tail", "posterior", "mf", "diagnostics")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}
_scalar_or_list = lambda item: {"oneOf": [item, {"type": "array", "items": item, "minItems": 1}]}  # noqa: E731

_training = {
    "type": "object",
    "properties": {
        "csv": {"type": "string"},
        "inputs": {"type": "array", "minItems": 1},
        "y": {"type": "array", "minItems": 1},
        "beta": _pos,
    },
    "required": ["beta"],
    "oneOf": [{"required": ["csv"]}, {"required": ["inputs", "y"]}],
}

_rate_opts = {
    "mc_samples": {"type": "integer", "minimum": 2},
    "max_iter": _posint,
    "gtol": _pos,
    "ess_floor": _nonneg,
    "rank": _posint,
}

PARAMS = {
    "simulate": {
        "properties": {"N": _posint, "reps": _posint},
        "required": ["N"],
    },
    "nngp": {"properties": {"hermite_nodes": {"type": "integer", "minimum": 2}}, "required": []},
    "lln": {
        "properties": {"Ns": {"type": "array", "items": _posint, "minItems": 1}, "reps": _posint,
                       "hermite_nodes": {"type": "integer", "minimum": 2}},
        "required": ["Ns", "reps"],
    },
    "rate": {
        "properties": {"path": {"enum": ["nngp", "simulated"]}, "N": _posint, **_rate_opts},
        "required": [],
    },
    "tail": {
        "properties": {
            "event": {
                "type": "object",
                "properties": {
                    "threshold": _num,
                    "functional": {"enum": ["trace", "trace_norm", "hs_norm", "op_norm", "entry"]},
                    "layer": _posint,
                    "direction": {"enum": [">=", "<="]},
                    "entry": {"type": "array", "items": {"type": "integer", "minimum": 0},
                              "minItems": 2, "maxItems": 2},
                },
                "required": ["threshold"],
            },
            "Ns": {"type": "array", "items": _posint, "minItems": 3},
            "reps": _posint,
            "min_hits": _posint,
        },
        "required": ["event", "Ns", "reps"],
    },
    "posterior": {
        "properties": {"training": _training, "N": _posint, "reps": _posint,
                       "mean_field": {"type": "boolean"}, "resample": {"type": "boolean"},
                       "interpolate": {"type": "boolean"}},
        "required": ["training", "N", "reps"],
    },
    "mf": {
        "properties": {
            "training": _training, "N": _posint, "chains": {"type": "integer", "minimum": 0},
            "search": {"type": "object", "properties": {
                "population": _posint, "elite": _posint, "iterations": _posint,
                "search_samples": {"type": "integer", "minimum": 2}, "refine_top": _posint,
                "bumps": {"type": "boolean"}}},
            **_rate_opts,
        },
        "required": ["training"],
    },
    "diagnostics": {
        "properties": {
            "clt": {"type": "object", "properties": {
                "inputs": {"type": "array", "minItems": 1}, "N": _posint, "M": _posint, "reps": {
                    "type": "integer", "minimum": 2}, "level": {"type": "number", "exclusiveMinimum": 0,
                                                               "exclusiveMaximum": 1},
                "method": {"enum": ["chain", "weights"]}, "bootstrap": _posint},
                "required": ["inputs", "N", "reps"]},
            "singvalue": {"type": "object", "properties": {
                "n1": _posint, "n2": _posint, "lam": _pos, "t_values": {"type": "array", "items": _nonneg},
                "reps": {"type": "integer", "minimum": 1000}, "C": _pos},
                "required": ["n1", "n2", "t_values", "reps", "C"]},
        },
        "required": [],
        "anyOf": [{"required": ["clt"]}, {"required": ["singvalue"]}],
    },
}

SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "stream_id": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "workers": _posint,
        "network": {
            "type": "object",
            "properties": {
                "L": _posint,
                "N0": _posint,
                "ratios": _scalar_or_list(_pos),
                "precisions": _scalar_or_list(_pos),
                "biases": _scalar_or_list(_nonneg),
                "activation": {"oneOf": [{"type": "string"}, {"type": "object", "required": ["kind"]}]},
                "D": _posint,
            },
            "required": ["L", "N0", "precisions", "activation"],
        },
        "grid": {
            "type": "object",
            "oneOf": [
                {"required": ["domain", "n"]},
                {"required": ["nodes", "weights"]},
            ],
            "properties": {
                "domain": {"type": "array", "minItems": 1},
                "n": _posint,
                "rule": {"enum": ["gauss_legendre", "trapezoid"]},
                "nodes": {"type": "array", "minItems": 1},
                "weights": {"type": "array", "items": _pos, "minItems": 1},
            },
        },
        "tolerances": {
            "type": "object",
            "properties": {"psd_tol": _nonneg, "sym_tol": _nonneg, "eig_clip": _nonneg},
            "additionalProperties": False,
        },
        "params": {"type": "object"},
    },
    "required": ["kind", "network"],
}


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _field_message(err) -> tuple[str, str]:
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else err.message
        base = _path(err)
        return (missing if base == "<root>" else f"{base}.{missing}"), "required field is missing"
    return _path(err), err.message


def _check(instance, schema, prefix=""):
    v = jsonschema.Draft202012Validator(schema)
    errors = sorted(v.iter_errors(instance), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        field, msg = _field_message(errors[0])
        raise ConfigError(prefix + field if field != "<root>" else (prefix.rstrip(".") or field), msg)


def _network_length_check(net: dict):
    L = net["L"]
    for name, expected in (("ratios", L), ("precisions", L + 1), ("biases", L + 1)):
        val = net.get(name)
        if isinstance(val, list) and len(val) not in (1, expected):
            raise ConfigError(f"network.{name}", f"expected {expected} values, got {len(val)}")


def validate(cfg: dict) -> dict:
    """Check a raw config dict; returns it with defaults filled in."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    _check(cfg, SCHEMA)
    cfg = copy.deepcopy(cfg)
    cfg.setdefault("seed", 0)
    cfg.setdefault("stream_id", 0)
    cfg.setdefault("params", {})
    kind = cfg["kind"]
    spec = {"type": "object", **PARAMS[kind]}
    _check(cfg["params"], spec, "params.")
    net = cfg["network"]
    _network_length_check(net)
    try:
        get_activation(net["activation"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("network.activation", str(exc)) from None
    if kind not in ("diagnostics", "posterior", "mf") and "grid" not in cfg:
        raise ConfigError("grid", "required field is missing")
    if "grid" in cfg:
        try:
            build_grid(cfg["grid"])
        except (ValueError, TypeError) as exc:
            raise ConfigError("grid", str(exc)) from None
    if kind == "diagnostics" and "clt" in cfg["params"]:
        X = np.asarray(cfg["params"]["clt"]["inputs"], dtype=float)
        if X.ndim != 2 or X.shape[1] != net["N0"]:
            raise ConfigError("params.clt.inputs", f"inputs must be a list of {net['N0']}-vectors")
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return validate(raw)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def build_network(cfg: dict) -> NetworkConfig:
    try:
        return NetworkConfig.from_dict({"ratios": 1.0, **cfg["network"]})
    except ValueError as exc:
        raise ConfigError("network", str(exc)) from None


def build_grid(spec: dict) -> Grid:
    if "nodes" in spec:
        return Grid(np.asarray(spec["nodes"], dtype=float), np.asarray(spec["weights"], dtype=float))
    return make_grid(spec["domain"], int(spec["n"]), spec.get("rule", "gauss_legendre"))


def build_tolerances(cfg: dict) -> Tolerances:
    return Tolerances(**cfg.get("tolerances", {}))


def build_seed(cfg: dict) -> SeedSpec:
    return SeedSpec(int(cfg["seed"]), int(cfg.get("stream_id", 0)))

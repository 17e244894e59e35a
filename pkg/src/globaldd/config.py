"""JSON experiment configuration.

Values in the file use Hz and seconds; everything is converted to
rad/s when the experiment objects are built. The defaults describe the
four-spin square-lattice experiment::

    {
      "register": {"topology": "square", "rows": 2, "cols": 2, "diagonals": true,
                   "zeeman_hz": [62800, 95900, 120100, 153180],
                   "coupling_hz": [17.3, 17.9, 18.5, 19.2, 6.1, 6.6]},
      "pulse": {"delta_t_s": 1e-7, "theta": 0.05, "iterations": 1, "hahn_echo": false},
      "noise": {"enabled": true, "preset": "moderate", "seed": 0},
      "experiment": {"total_time_s": 0.1, "sample_interval_s": 0.0005, "ensemble": 8,
                     "metric": "unitary", "reference": "local"},
      "output": {"dir": "out"}
    }

Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
import re

import numpy as np

from .sequences import BlockParams
from .simulator import ExperimentConfig
from .systems import LATTICE_COUPLING_HZ, LATTICE_ZEEMAN_HZ, NOISE_PRESETS_HZ, CouplingNoise, RegisterSpec, Topology
from .systems import build_register as _build

__all__ = ["ConfigError", "DEFAULTS", "apply_override", "build_experiment", "dumps", "load", "loads"]

TWO_PI = 2 * np.pi

DEFAULTS = {
    "register": {
        "topology": "square",  # chain | square | explicit
        "n": None,
        "rows": 2,
        "cols": 2,
        "diagonals": True,
        "edges": None,  # explicit topology: [[j, k], ...] or [[j, k, kind], ...]
        "zeeman_hz": list(LATTICE_ZEEMAN_HZ),
        "coupling_hz": list(LATTICE_COUPLING_HZ),
    },
    "pulse": {"delta_t_s": 1e-7, "theta": 0.05, "iterations": 1, "hahn_echo": False},
    "noise": {"enabled": True, "preset": "moderate", "mean_hz": None, "std_hz": None, "seed": 0},
    "experiment": {
        "total_time_s": 0.1,
        "sample_interval_s": 5e-4,
        "ensemble": 8,
        "metric": "unitary",  # unitary | state
        "reference": "local",  # local | lab
        "initial_state": None,  # [[re, im], ...]; default |+> on every qubit
    },
    "output": {"dir": "out", "decoupled_csv": "decoupled.csv", "free_csv": "free.csv",
               "summary": "summary.json"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(rf'"{re.escape(key)}"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _merge(defaults: dict, given: dict, path: str, text: str | None) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"section {path or 'root'} must be an object", _line_of(text, path.rsplit(".", 1)[-1]))
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown key {where!r}", _line_of(text, key))
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value, where, text)
        else:
            out[key] = value
    return out


def loads(text: str) -> dict:
    """Parse a JSON document and fill in defaults."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    doc = _merge(DEFAULTS, data, "", text)
    validate(doc, text)
    return doc


def load(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)


def apply_override(doc: dict, assignment: str) -> dict:
    """Apply ``"section.key=value"``; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = copy.deepcopy(doc)
    node, ref = out, DEFAULTS
    for k in keys[:-1]:
        if not isinstance(ref, dict) or k not in ref or not isinstance(ref[k], dict):
            raise ConfigError(f"unknown section {path!r} in override")
        node, ref = node[k], ref[k]
    if keys[-1] not in ref or isinstance(ref[keys[-1]], dict):
        raise ConfigError(f"unknown key {path!r} in override")
    node[keys[-1]] = value
    validate(out)
    return out


def _require(cond, message, text=None, key=None):
    if not cond:
        raise ConfigError(message, _line_of(text, key) if key else None)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def validate(doc: dict, text: str | None = None) -> None:
    reg, pulse, noise, exp = doc["register"], doc["pulse"], doc["noise"], doc["experiment"]
    _require(reg["topology"] in ("chain", "square", "explicit"),
             f"register.topology must be chain, square or explicit, got {reg['topology']!r}", text, "topology")
    _require(isinstance(reg["zeeman_hz"], list) and all(_is_num(w) for w in reg["zeeman_hz"]),
             "register.zeeman_hz must be a list of numbers", text, "zeeman_hz")
    c = reg["coupling_hz"]
    _require(_is_num(c) or (isinstance(c, list) and all(_is_num(v) for v in c)),
             "register.coupling_hz must be a number or a list of numbers", text, "coupling_hz")
    for key in ("delta_t_s", "theta"):
        _require(_is_num(pulse[key]), f"pulse.{key} must be a number", text, key)
    _require(pulse["delta_t_s"] > 0, "pulse.delta_t_s must be positive", text, "delta_t_s")
    _require(pulse["theta"] >= 0, "pulse.theta must be non-negative", text, "theta")
    _require(pulse["iterations"] == 1 and not isinstance(pulse["iterations"], bool),
             "pulse.iterations: the simulator runs one level of decoupling; use the sweep "
             "command for nested levels", text, "iterations")
    _require(isinstance(pulse["hahn_echo"], bool), "pulse.hahn_echo must be true or false", text, "hahn_echo")
    _require(isinstance(noise["enabled"], bool), "noise.enabled must be true or false", text, "enabled")
    _require(noise["preset"] in NOISE_PRESETS_HZ,
             f"noise.preset must be one of {sorted(NOISE_PRESETS_HZ)}", text, "preset")
    _require(isinstance(noise["seed"], int) and not isinstance(noise["seed"], bool),
             "noise.seed must be an integer", text, "seed")
    for key in ("mean_hz", "std_hz"):
        v = noise[key]
        _require(v is None or (isinstance(v, list) and all(_is_num(x) for x in v)),
                 f"noise.{key} must be null or a list of numbers", text, key)
    for key in ("total_time_s", "sample_interval_s"):
        _require(_is_num(exp[key]) and exp[key] > 0, f"experiment.{key} must be a positive number", text, key)
    _require(isinstance(exp["ensemble"], int) and exp["ensemble"] >= 1,
             "experiment.ensemble must be a positive integer", text, "ensemble")
    _require(exp["metric"] in ("unitary", "state"), "experiment.metric must be unitary or state", text, "metric")
    _require(exp["reference"] in ("local", "lab"), "experiment.reference must be local or lab", text, "reference")


def build_register(doc: dict) -> RegisterSpec:
    reg = doc["register"]
    kind = reg["topology"]
    omegas = [TWO_PI * w for w in reg["zeeman_hz"]]
    if kind == "chain":
        topo = Topology("chain", n=reg["n"] or len(omegas))
    elif kind == "square":
        topo = Topology("square", rows=reg["rows"], cols=reg["cols"], diagonals=bool(reg["diagonals"]))
    else:
        if not reg["edges"]:
            raise ConfigError("register.edges is required for the explicit topology")
        topo = Topology("explicit", n=reg["n"] or len(omegas), edges=tuple(tuple(e) for e in reg["edges"]))
    c = reg["coupling_hz"]
    couplings = TWO_PI * np.asarray(c, dtype=float)
    try:
        return _build(topo, omegas, couplings)
    except ValueError as exc:
        raise ConfigError(f"register: {exc}") from None


def build_noise(doc: dict, register: RegisterSpec) -> CouplingNoise | None:
    cfg = doc["noise"]
    if not cfg["enabled"]:
        return None
    n_edges = len(register.edges)
    means = register.couplings if cfg["mean_hz"] is None else TWO_PI * np.asarray(cfg["mean_hz"], dtype=float)
    if cfg["std_hz"] is None:
        adj, diag = NOISE_PRESETS_HZ[cfg["preset"]]
        stds = [TWO_PI * (diag if k == "diagonal" else adj) for k in register.edge_kinds]
    else:
        stds = TWO_PI * np.asarray(cfg["std_hz"], dtype=float)
    if len(means) != n_edges or len(stds) != n_edges:
        raise ConfigError(f"noise needs {n_edges} per-edge values")
    return CouplingNoise(tuple(means), tuple(stds), int(cfg["seed"]))


def build_experiment(doc: dict) -> ExperimentConfig:
    """Experiment objects in rad/s from a validated document."""
    register = build_register(doc)
    if doc["noise"]["enabled"] and doc["noise"]["mean_hz"] is not None:
        register = register.with_couplings(TWO_PI * np.asarray(doc["noise"]["mean_hz"], dtype=float))
    exp = doc["experiment"]
    state = exp["initial_state"]
    if state is not None:
        state = tuple(complex(*v) if isinstance(v, list) else complex(v) for v in state)
    try:
        return ExperimentConfig(
            register=register,
            params=BlockParams(doc["pulse"]["delta_t_s"], doc["pulse"]["theta"]),
            noise=build_noise(doc, register),
            total_time=exp["total_time_s"],
            sample_interval=exp["sample_interval_s"],
            iterations=doc["pulse"]["iterations"],
            ensemble_size=exp["ensemble"],
            reference=exp["reference"],
            metric=exp["metric"],
            initial_state=state,
            hahn_echo=doc["pulse"]["hahn_echo"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

"""Experiment configuration: defaults, INI/JSON files and command-line flags.

Precedence is flags > file > defaults.  Files are either sectioned
``key = value`` text or a flat JSON object; unknown keys, bad types and
violated preconditions raise ConfigError naming the offending key.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .lattice import MIN_BETA, Boundary, LatticeError, LatticeSpec, parse_kernel
from .mc import DEFAULT_ALPHAS
from .ward import PROBES


class ConfigError(ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


MODES = ("Simulate", "ChainExact", "Spectrum", "WardCheck", "CrossValidate")
_MODE_ALIASES = {m.lower(): m for m in MODES}
_MODE_ALIASES.update({"chain_exact": "ChainExact", "ward_check": "WardCheck",
                      "cross_validate": "CrossValidate"})


@dataclass
class ExperimentConfig:
    mode: Optional[str] = None
    # model
    N: int = 2
    dims: List[int] = field(default_factory=lambda: [16, 16])
    beta: float = 1.0
    alpha: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    gauge_fix: str = Boundary.FIXED_SPIN_BOUNDARY.value
    epsilon: float = 0.0
    # run
    kernel: str = "heatbath"
    metropolis_scale: float = 1.0
    sweeps: int = 10000
    therm: Optional[int] = None
    measure_every: int = 1
    seed: int = 0
    symmetry_moves: bool = False
    parallel: bool = True
    ward_probes: List[str] = field(default_factory=lambda: ["n0", "n1"])
    # solver
    L: List[int] = field(default_factory=lambda: [1, 2, 4, 8, 12, 16, 32, 64])
    rho_max: Optional[float] = None
    nodes: Optional[int] = None
    modes: Optional[int] = None
    # output
    out: str = "out"

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def lattice_spec(self):
        eps = self.epsilon if self.gauge_fix == Boundary.EXTERNAL_FIELD.value else 0.0
        return LatticeSpec(tuple(self.dims), self.gauge_fix, self.N, eps)


SECTIONS = {
    "experiment": ("mode",),
    "model": ("N", "dims", "beta", "alpha", "gauge_fix", "epsilon"),
    "run": ("kernel", "metropolis_scale", "sweeps", "therm", "measure_every", "seed", "symmetry_moves",
            "parallel", "ward_probes"),
    "solver": ("L", "rho_max", "nodes", "modes"),
    "output": ("out",),
}
_SECTION_OF = {k: s for s, keys in SECTIONS.items() for k in keys}
_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
assert set(_FIELDS) == set(_SECTION_OF)

# key -> (kind, optional)
_KINDS = {
    "mode": ("str", True), "N": ("int", False), "dims": ("ints", False), "beta": ("float", False),
    "alpha": ("floats", False), "gauge_fix": ("str", False), "epsilon": ("float", False),
    "kernel": ("str", False), "metropolis_scale": ("float", False), "sweeps": ("int", False),
    "therm": ("int", True), "measure_every": ("int", False), "seed": ("int", False),
    "symmetry_moves": ("bool", False), "parallel": ("bool", False), "ward_probes": ("strs", False),
    "L": ("ints", False), "rho_max": ("float", True), "nodes": ("int", True), "modes": ("int", True),
    "out": ("str", False),
}
_ALIASES = {"thermalization": "therm", "measure-every": "measure_every", "gauge-fix": "gauge_fix",
            "rho-max": "rho_max", "n": "N"}


def _canon_key(key):
    k = key.strip()
    k = _ALIASES.get(k, k)
    k = k.replace("-", "_")
    if k not in _KINDS:
        raise ConfigError(key, "unknown key")
    return k


def _split(text):
    text = text.strip().strip("[]")
    if not text:
        return []
    sep = "x" if "x" in text and "," not in text and " " not in text.strip() else ","
    return [t.strip() for t in text.replace(" ", ",").split(sep) if t.strip()]


def _coerce(key, value):
    """Value from JSON (typed) or text (string) to the field's type."""
    kind, optional = _KINDS[key]
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null", "auto")):
        if optional:
            return None
        raise ConfigError(key, "a value is required")
    try:
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value.strip()
        if kind == "int":
            return _to_int(value)
        if kind == "float":
            return _to_float(value)
        if kind == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.strip().lower() in ("1", "true", "yes", "on"):
                return True
            if isinstance(value, str) and value.strip().lower() in ("0", "false", "no", "off"):
                return False
            raise TypeError
        items = _split(value) if isinstance(value, str) else value
        if not isinstance(items, (list, tuple)):
            items = [items]
        if kind == "ints":
            return [_to_int(v) for v in items]
        if kind == "floats":
            return [_to_float(v) for v in items]
        if kind == "strs":
            if not all(isinstance(v, str) for v in items):
                raise TypeError
            return [v.strip() for v in items]
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {kind}, got {value!r}") from None
    raise AssertionError(kind)


def _to_int(v):
    if isinstance(v, bool):
        raise TypeError
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError
        return int(v)
    return int(str(v).strip())


def _to_float(v):
    if isinstance(v, bool):
        raise TypeError
    if isinstance(v, (int, float)):
        return float(v)
    return float(str(v).strip())


def read_file(path) -> Dict[str, Any]:
    """Raw key -> value mapping from an INI-like or JSON file (unvalidated)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "JSON config must be an object")
        return {_canon_key(k): v for k, v in data.items()}
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), default_section="__defaults__")
    cp.optionxform = str
    try:
        # keys before the first section header belong to [experiment]
        cp.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse: {exc}") from None
    out = {}
    for name in cp.sections():
        sec = "experiment" if name == "__top__" else name
        if sec not in SECTIONS:
            raise ConfigError(sec, f"unknown section; known: {sorted(SECTIONS)}")
        for k, v in cp.items(name):
            key = _canon_key(k)
            if _SECTION_OF[key] != sec:
                raise ConfigError(k, f"belongs in section [{_SECTION_OF[key]}], not [{sec}]")
            out[key] = v
    return out


def parse_config(path=None, flags: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Merge defaults, a file and flag overrides, then validate."""
    values: Dict[str, Any] = {}
    if path is not None:
        for k, v in read_file(path).items():
            values[k] = _coerce(k, v)
    for k, v in (flags or {}).items():
        if v is None:
            continue
        key = _canon_key(k)
        values[key] = _coerce(key, v)
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def from_json(text) -> ExperimentConfig:
    data = json.loads(text)
    cfg = ExperimentConfig(**{_canon_key(k): _coerce(_canon_key(k), v) for k, v in data.items()})
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    """Check every field against module preconditions; normalizes mode and gauge_fix names."""
    if cfg.mode is None:
        raise ConfigError("mode", f"required; one of {', '.join(MODES)}")
    m = _MODE_ALIASES.get(cfg.mode.lower())
    if m is None:
        raise ConfigError("mode", f"unknown mode {cfg.mode!r}; one of {', '.join(MODES)}")
    cfg.mode = m
    if not (math.isfinite(cfg.beta) and cfg.beta > 0):
        raise ConfigError("beta", f"must satisfy beta > 0 (got {cfg.beta})")
    if m in ("Simulate", "WardCheck", "CrossValidate") and cfg.beta < MIN_BETA:
        raise ConfigError("beta", f"Monte Carlo needs beta >= {MIN_BETA} (got {cfg.beta})")
    if not 2 <= cfg.N <= 8:
        raise ConfigError("N", f"must be in 2..8 (got {cfg.N})")
    if m in ("ChainExact", "CrossValidate") and cfg.N != 2:
        raise ConfigError("N", "the exact chain solver is for N = 2")
    if not cfg.alpha or not all(math.isfinite(a) for a in cfg.alpha):
        raise ConfigError("alpha", "need a nonempty list of finite rapidities")
    try:
        cfg.gauge_fix = Boundary(cfg.gauge_fix.lower().replace("-", "_")).value
    except ValueError:
        raise ConfigError("gauge_fix", f"one of {[b.value for b in Boundary]}") from None
    if not (math.isfinite(cfg.epsilon) and cfg.epsilon >= 0):
        raise ConfigError("epsilon", "must be a nonnegative number")
    if cfg.gauge_fix == Boundary.EXTERNAL_FIELD.value and not cfg.epsilon > 0:
        raise ConfigError("epsilon", "external_field gauge fixing needs epsilon > 0")
    if m in ("Simulate", "WardCheck"):
        try:
            cfg.lattice_spec()
        except LatticeError as exc:
            raise ConfigError("dims", str(exc)) from None
    try:
        parse_kernel(cfg.kernel.lower())
    except LatticeError as exc:
        raise ConfigError("kernel", str(exc)) from None
    cfg.kernel = cfg.kernel.lower()
    if not cfg.metropolis_scale > 0:
        raise ConfigError("metropolis_scale", "must be positive")
    for key in ("sweeps", "seed"):
        if getattr(cfg, key) < 0:
            raise ConfigError(key, "must be nonnegative")
    if cfg.seed >= 2**64:
        raise ConfigError("seed", "must fit in 64 bits")
    if cfg.therm is not None and cfg.therm < 0:
        raise ConfigError("therm", "must be nonnegative")
    if cfg.measure_every < 1:
        raise ConfigError("measure_every", "must be >= 1")
    for p in cfg.ward_probes:
        if p not in PROBES:
            raise ConfigError("ward_probes", f"unknown probe {p!r}; registered: {sorted(PROBES)}")
    if not cfg.L or any(x < 0 for x in cfg.L):
        raise ConfigError("L", "need a nonempty list of nonnegative chain lengths")
    if m == "CrossValidate" and (len(cfg.L) != 1 or cfg.L[0] < 1):
        raise ConfigError("L", "CrossValidate takes a single L >= 1")
    if cfg.rho_max is not None and not (math.isfinite(cfg.rho_max) and cfg.rho_max > 0):
        raise ConfigError("rho_max", "must be positive")
    if cfg.nodes is not None and cfg.nodes < 3:
        raise ConfigError("nodes", "need at least 3 nodes")
    if cfg.modes is not None and cfg.modes < 1:
        raise ConfigError("modes", "need at least 1 mode")
    if not cfg.out:
        raise ConfigError("out", "output directory required")
    return cfg

"""Experiment configuration: one JSON document per experiment."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .planted import (
    GOLDEN,
    TWO_PI,
    Planted,
    cos_factor,
    draw_V,
    make_planted,
    planted_from_V,
    rotation_coboundary_factor,
)
from .sums import TensorObservable
from .systems import FiniteMap, FiniteSpace, System

STAGES = ("support", "nonsingularity", "sums", "shifted_sums", "solve", "komlos", "verify", "reverse")
SAMPLING_STAGES = {"nonsingularity"}


class ConfigError(ValueError):
    """The configuration does not parse or validate."""


@dataclass
class Parameters:
    N_max: int = 32
    M_max: int = 8
    horizon: int = 64
    p: float = math.inf
    K: int = 8
    subsequence: object = "pow2_aligned"
    seed: int | None = None
    tolerance: float | None = None
    orbit_constant: object = 0
    trials: int = 200
    samples: int = 10_000
    start: tuple | None = None


@dataclass
class ExperimentConfig:
    raw: dict
    system: System
    observable: object
    planted_V: object
    tensor: bool
    stages: list
    params: Parameters
    out_dir: Path = field(default_factory=lambda: Path("out"))


def parse_number(v):
    """Ints and ``"a/b"`` strings stay exact; anything else becomes a float."""
    if isinstance(v, bool):
        raise ConfigError(f"not a number: {v!r}")
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        try:
            f = Fraction(v)
        except ValueError as exc:
            raise ConfigError(f"not a number: {v!r}") from exc
        return int(f) if f.denominator == 1 else f
    if isinstance(v, float):
        return v
    raise ConfigError(f"not a number: {v!r}")


def parse_p(v) -> float:
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    try:
        p = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad p: {v!r}") from exc
    if not p >= 1:
        raise ConfigError("p must be at least 1")
    return p


def build_system(spec: dict) -> System:
    if not isinstance(spec, dict):
        raise ConfigError("system must be an object")
    if "alphas" in spec:
        alphas = spec["alphas"]
        if not isinstance(alphas, list) or not alphas:
            raise ConfigError("alphas must be a nonempty list")
        return System.rotations([GOLDEN if a == "golden" else float(a) for a in alphas])
    if "atoms" not in spec:
        raise ConfigError("finite systems need 'atoms'")
    if "maps" not in spec:
        raise ConfigError("finite systems need 'maps'")
    m = spec["atoms"]
    if not isinstance(m, int) or m < 1:
        raise ConfigError("'atoms' must be a positive integer")
    weights = spec.get("weights")
    try:
        space = FiniteSpace.uniform(m) if weights is None else FiniteSpace(tuple(parse_number(w) for w in weights))
        maps = tuple(FiniteMap.from_forward(p) for p in spec["maps"])
        return System(space, maps)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def named_factor(sys: System, spec: dict, i: int):
    """A factor for map ``i`` from a named closed form; returns (factor, bound)."""
    name = spec.get("name")
    if name == "const":
        value = parse_number(spec.get("value", 1))
        if sys.is_finite:
            return (value,) * sys.space.size, None
        return (lambda x, v=float(value): 0.0 * x + v), abs(float(value))
    if name == "cos":
        if sys.is_finite:
            m = sys.space.size
            return tuple(math.cos(TWO_PI * k / m) for k in range(m)), None
        return cos_factor, 1.0
    if name == "indicator":
        if sys.is_finite:
            atom = int(spec["atom"])
            return tuple(int(k == atom) for k in range(sys.space.size)), None
        a, b = (float(t) for t in spec["interval"])
        return (lambda x: ((x >= a) & (x < b)).astype(float)), 1.0
    if name == "planted_coboundary":
        if sys.is_finite:
            # g - g o T_i with g the indicator of one atom
            atom = int(spec.get("atom", 0))
            t = sys.maps[i]
            return tuple(int(k == atom) - int(t.forward[k] == atom) for k in range(sys.space.size)), None
        return rotation_coboundary_factor(sys.maps[i].alpha), 2.0
    raise ConfigError(f"unknown factor {spec!r}")


def build_observable(sys: System, spec: dict, seed) -> Planted:
    if not isinstance(spec, dict):
        raise ConfigError("observable must be an object")
    if "planted" in spec:
        planted = dict(spec["planted"])
        if sys.is_finite:
            if planted.get("V", "random") == "random" and seed is None:
                raise ConfigError("a random planted V needs a seed")
            try:
                V = draw_V(sys, planted, np.random.default_rng(seed))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad planted V: {exc}") from exc
            return planted_from_V(sys, V)
        alphas = [t.alpha for t in sys.maps]
        return make_planted("rotation", {"alphas": alphas}, seed)
    factors = spec.get("factors")
    if not isinstance(factors, list) or len(factors) != sys.H:
        raise ConfigError(f"need exactly {sys.H} factors")
    tables, bounds = [], []
    for i, f in enumerate(factors):
        if isinstance(f, list):
            if not sys.is_finite:
                raise ConfigError("value tables need a finite system")
            if len(f) != sys.space.size:
                raise ConfigError("value table length must equal the number of atoms")
            tables.append(tuple(parse_number(v) for v in f))
            bounds.append(None)
        elif isinstance(f, dict):
            try:
                table, bound = named_factor(sys, f, i)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad factor {f!r}: {exc}") from exc
            tables.append(table)
            bounds.append(bound)
        else:
            raise ConfigError(f"bad factor {f!r}")
    if sys.is_finite:
        return Planted(sys, TensorObservable(tuple(tables)), None, True)
    return Planted(sys, TensorObservable(tuple(tables), factor_bounds=tuple(bounds)), None, True)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(raw, overrides)


def parse_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    params_raw = dict(raw.get("parameters", {}))
    params = Parameters()
    for key, value in params_raw.items():
        if not hasattr(params, key):
            raise ConfigError(f"unknown parameter {key!r}")
        setattr(params, key, value)
    for key, value in overrides.items():
        if key in ("stages", "out"):
            continue
        setattr(params, key, value)
    params.p = parse_p(params.p)
    for key in ("N_max", "M_max", "horizon", "K", "trials", "samples"):
        value = getattr(params, key)
        if not isinstance(value, int) or isinstance(value, bool) or value < (0 if key == "M_max" else 1):
            raise ConfigError(f"{key} must be a positive integer")
    if params.start is not None:
        params.start = tuple(params.start)
    if params.tolerance is not None:
        params.tolerance = float(params.tolerance)
    if params.orbit_constant is not None:
        params.orbit_constant = parse_number(params.orbit_constant)

    stages = overrides.get("stages", raw.get("pipeline"))
    if not isinstance(stages, list) or not stages:
        raise ConfigError("pipeline must be a nonempty list of stage names")
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ConfigError(f"unknown stages {unknown}; choose from {list(STAGES)}")
    if len(set(stages)) != len(stages):
        raise ConfigError("each stage may appear once")

    if "system" not in raw:
        raise ConfigError("missing 'system'")
    sys = build_system(raw["system"])
    needs_seed = bool(SAMPLING_STAGES & set(stages)) or (not sys.is_finite and "sums" in stages)
    if needs_seed and params.seed is None:
        raise ConfigError("a seed is required when sampling is requested")
    if "observable" not in raw:
        raise ConfigError("missing 'observable'")
    planted = build_observable(sys, raw["observable"], params.seed)
    if params.start is not None:
        try:
            params.start = sys.check_point(params.start)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    out = overrides.get("out") or raw.get("output", {}).get("dir", "out")
    ordered = [s for s in STAGES if s in stages]
    return ExperimentConfig(raw, sys, planted.observable, planted.V, planted.tensor, ordered, params, Path(out))

"""Fixtures with a known transfer function: pick ``V``, set ``F = V - V o Phi``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .measures import build_nu_support
from .sums import SupportObservable, TensorObservable
from .systems import FiniteMap, FiniteSpace, System

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CallableObservable:
    """A vectorized function of the whole product point, not split into factors."""

    func: Callable
    bound: float
    tensor: bool = field(default=False, init=False)

    def __call__(self, z):
        return float(self.func(np.asarray(z, dtype=float)[None, :])[0])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(points), dtype=float)


@dataclass
class Planted:
    system: System
    observable: object
    V: object
    tensor: bool


def cos_factor(x):
    return np.cos(TWO_PI * np.asarray(x))


def rotation_coboundary_factor(alpha: float) -> Callable:
    """``x -> cos 2 pi x - cos 2 pi (x + alpha)``."""

    def f(x):
        x = np.asarray(x)
        return np.cos(TWO_PI * x) - np.cos(TWO_PI * (x + alpha))

    return f


def random_finite_system(rng, m: int, H: int, uniform: bool = True) -> System:
    """Random weight-preserving permutations.

    With ``uniform=False`` the atoms are split into blocks of equal weight and
    each map permutes within blocks only.
    """
    if uniform:
        space = FiniteSpace.uniform(m)
        blocks = [list(range(m))]
    else:
        cuts = sorted(rng.choice(np.arange(1, m), size=min(m - 1, int(rng.integers(0, 3))), replace=False).tolist()) if m > 1 else []
        bounds = [0, *cuts, m]
        blocks = [list(range(a, b)) for a, b in zip(bounds, bounds[1:])]
        raw = [int(rng.integers(1, 5)) for _ in blocks]
        total = sum(r * len(b) for r, b in zip(raw, blocks))
        weights = [Fraction(0)] * m
        for r, b in zip(raw, blocks):
            for i in b:
                weights[i] = Fraction(r, total)
        space = FiniteSpace(tuple(weights))
    maps = []
    for _ in range(H):
        forward = list(range(m))
        for b in blocks:
            image = rng.permutation(b).tolist()
            for i, j in zip(b, image):
                forward[i] = j
        maps.append(FiniteMap.from_forward(forward))
    return System(space, tuple(maps))


def planted_from_V(sys: System, V: np.ndarray) -> Planted:
    """Observable ``F = V - V o Phi`` on the support, in tensor form when ``H = 1``."""
    support = build_nu_support(sys)
    F = V - V[support.phi]
    values = dict(zip(support.points, F.tolist()))
    if sys.H == 1:
        table = [values.get((x,), 0) for x in range(sys.space.size)]
        return Planted(sys, TensorObservable((tuple(table),)), V, True)
    return Planted(sys, SupportObservable(values), V, False)


def make_planted(kind: str, params: dict | None = None, seed=0) -> Planted:
    """Generate ``(system, observable, V)``.

    kinds:
      ``finite_cyclic``  Z_m with shifts ``params["shifts"]``; V is
                         ``{"V": "indicator", "point": [...]}`` or random integers.
      ``finite_random``  random weight-preserving permutations, random integer V.
      ``rotation``       rotations by ``params["alphas"]`` (default golden
                         ratio conjugate) with ``V0(z) = prod cos 2 pi z_i``.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    if kind == "finite_cyclic":
        m = int(params.get("m", 4))
        shifts = params.get("shifts", [1, 2])
        sys = System(FiniteSpace.uniform(m), tuple(FiniteMap.shift(m, s) for s in shifts))
        V = draw_V(sys, params, rng)
        return planted_from_V(sys, V)
    if kind == "finite_random":
        m = int(params.get("m", rng.integers(2, 9)))
        H = int(params.get("H", rng.integers(1, 4)))
        sys = random_finite_system(rng, m, H, uniform=params.get("uniform", True))
        V = draw_V(sys, params, rng)
        return planted_from_V(sys, V)
    if kind == "rotation":
        alphas = [float(a) for a in params.get("alphas", [GOLDEN])]
        sys = System.rotations(alphas)
        if len(alphas) == 1:
            obs = TensorObservable((rotation_coboundary_factor(sys.maps[0].alpha),), factor_bounds=(2.0,))
            return Planted(sys, obs, cos_factor, True)
        shifts = np.array([t.alpha for t in sys.maps])

        def V0(points):
            return np.prod(np.cos(TWO_PI * np.asarray(points)), axis=-1)

        def F(points):
            points = np.asarray(points)
            return V0(points) - V0((points + shifts) % 1.0)

        return Planted(sys, CallableObservable(F, 2.0), V0, False)
    raise ValueError(f"unknown planted kind {kind!r}")


def draw_V(sys: System, params: dict, rng) -> np.ndarray:
    support = build_nu_support(sys)
    spec = params.get("V", "random")
    if spec == "indicator":
        point = tuple(params.get("point", [0] * sys.H))
        return support.indicator([point])
    if spec == "random":
        low, high = int(params.get("low", -3)), int(params.get("high", 3))
        return rng.integers(low, high + 1, size=len(support)).astype(np.int64)
    if spec == "zero":
        return np.zeros(len(support), dtype=np.int64)
    raise ValueError(f"unknown V spec {spec!r}")

"""Probability measure-preserving systems and their product map.

Two flavors are supported:

* finite-atomic spaces, where every map is a weight-preserving permutation
  of the atoms ``0..m-1``;
* the unit circle ``[0, 1)`` with Lebesgue measure, acted on by rotations.

A point of the product space ``X^H`` is a plain tuple with one coordinate per
map. Coordinates are atom indices on finite spaces and floats on the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Real
from typing import Sequence, Union

Weight = Union[Fraction, float]
ProductPoint = tuple

CIRCLE_TOL = 1e-12


class InvalidPointError(ValueError):
    """A product point has a coordinate outside the system's space."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


@dataclass(frozen=True)
class FiniteSpace:
    """Atoms ``0..m-1`` with probability weights.

    ``weights`` holds either all :class:`~fractions.Fraction` values (exact mode)
    or all floats.
    """

    weights: tuple
    atoms: tuple = ()

    def __post_init__(self):
        weights = tuple(self.weights)
        if not weights:
            raise ValueError("a finite space needs at least one atom")
        exact = all(isinstance(w, (Fraction, int)) for w in weights)
        if exact:
            weights = tuple(Fraction(w) for w in weights)
        else:
            weights = tuple(float(w) for w in weights)
        if any(w < 0 for w in weights):
            raise ValueError("atom weights must be nonnegative")
        total = sum(weights)
        if exact and total != 1:
            raise ValueError(f"atom weights sum to {total}, not 1")
        if not exact and abs(total - 1.0) > 1e-12:
            raise ValueError(f"atom weights sum to {total!r}, not 1")
        atoms = tuple(self.atoms) if self.atoms else tuple(range(len(weights)))
        if len(atoms) != len(weights):
            raise ValueError("need exactly one weight per atom")
        if len(set(atoms)) != len(atoms):
            raise ValueError("atom identifiers must be unique")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def uniform(cls, m: int) -> "FiniteSpace":
        return cls(tuple(Fraction(1, m) for _ in range(m)))

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def exact(self) -> bool:
        return isinstance(self.weights[0], Fraction)


@dataclass(frozen=True)
class FiniteMap:
    """An invertible map of a finite space, stored with its inverse."""

    forward: tuple
    inverse: tuple
    # cycle decomposition used to evaluate powers in O(1)
    _cycle_of: tuple = field(default=(), repr=False, compare=False)
    _position: tuple = field(default=(), repr=False, compare=False)
    _cycles: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        forward = tuple(int(i) for i in self.forward)
        inverse = tuple(int(i) for i in self.inverse)
        m = len(forward)
        if sorted(forward) != list(range(m)):
            raise ValueError(f"{forward} is not a permutation of 0..{m - 1}")
        if len(inverse) != m or any(inverse[forward[i]] != i for i in range(m)):
            raise ValueError("inverse does not invert forward")
        object.__setattr__(self, "forward", forward)
        object.__setattr__(self, "inverse", inverse)

        cycle_of = [0] * m
        position = [0] * m
        cycles = []
        seen = [False] * m
        for start in range(m):
            if seen[start]:
                continue
            cycle = []
            i = start
            while not seen[i]:
                seen[i] = True
                cycle_of[i] = len(cycles)
                position[i] = len(cycle)
                cycle.append(i)
                i = forward[i]
            cycles.append(tuple(cycle))
        object.__setattr__(self, "_cycle_of", tuple(cycle_of))
        object.__setattr__(self, "_position", tuple(position))
        object.__setattr__(self, "_cycles", tuple(cycles))

    @classmethod
    def from_forward(cls, forward: Sequence[int]) -> "FiniteMap":
        forward = tuple(int(i) for i in forward)
        inverse = [0] * len(forward)
        for i, j in enumerate(forward):
            inverse[j] = i
        return cls(forward, tuple(inverse))

    @classmethod
    def shift(cls, m: int, step: int) -> "FiniteMap":
        """The cyclic shift ``i -> i + step (mod m)``."""
        return cls.from_forward([(i + step) % m for i in range(m)])

    @property
    def size(self) -> int:
        return len(self.forward)

    @property
    def cycles(self) -> tuple:
        return self._cycles

    def power(self, i: int, n: int) -> int:
        cycle = self._cycles[self._cycle_of[i]]
        return cycle[(self._position[i] + n) % len(cycle)]

    def preserves(self, weights: Sequence[Weight], tol: float = 1e-12) -> bool:
        for i, j in enumerate(self.forward):
            diff = weights[j] - weights[i]
            if isinstance(diff, Fraction):
                if diff != 0:
                    return False
            elif abs(diff) > tol:
                return False
        return True


@dataclass(frozen=True)
class CircleRotation:
    """``x -> x + alpha (mod 1)`` on ``[0, 1)`` with Lebesgue measure."""

    alpha: float

    def __post_init__(self):
        alpha = float(self.alpha)
        if not math.isfinite(alpha):
            raise ValueError("rotation angle must be finite")
        object.__setattr__(self, "alpha", alpha % 1.0)

    def power(self, x: float, n: int) -> float:
        return (x + n * self.alpha) % 1.0


CIRCLE = "circle"


@dataclass(frozen=True)
class System:
    """``(X, mu, T_1, ..., T_H)``; maps need not commute."""

    space: object
    maps: tuple

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValueError("a system needs at least one map")
        object.__setattr__(self, "maps", maps)
        if self.space == CIRCLE:
            if not all(isinstance(t, CircleRotation) for t in maps):
                raise TypeError("circle systems take CircleRotation maps only")
            return
        if not isinstance(self.space, FiniteSpace):
            raise TypeError(f"unsupported space {self.space!r}")
        for t in maps:
            if not isinstance(t, FiniteMap):
                raise TypeError("finite systems take FiniteMap maps only")
            if t.size != self.space.size:
                raise ValueError("map size does not match the number of atoms")
            if not t.preserves(self.space.weights):
                raise ValueError(f"map {t.forward} does not preserve the weights")

    @classmethod
    def finite(cls, perms: Sequence[Sequence[int]], weights=None) -> "System":
        m = len(perms[0])
        space = FiniteSpace.uniform(m) if weights is None else FiniteSpace(tuple(weights))
        return cls(space, tuple(FiniteMap.from_forward(p) for p in perms))

    @classmethod
    def rotations(cls, alphas: Sequence[float]) -> "System":
        return cls(CIRCLE, tuple(CircleRotation(a) for a in alphas))

    @property
    def H(self) -> int:
        return len(self.maps)

    @property
    def is_finite(self) -> bool:
        return self.space != CIRCLE

    @property
    def exact(self) -> bool:
        return self.is_finite and self.space.exact

    def diagonal(self, x) -> ProductPoint:
        return (x,) * self.H

    def check_point(self, z) -> ProductPoint:
        z = tuple(z)
        if len(z) != self.H:
            raise InvalidPointError(f"expected {self.H} coordinates, got {len(z)}")
        if self.is_finite:
            m = self.space.size
            for c in z:
                if isinstance(c, bool) or not isinstance(c, Integral) or not 0 <= c < m:
                    raise InvalidPointError(f"coordinate {c!r} is not an atom of 0..{m - 1}")
            z = tuple(int(c) for c in z)
        else:
            for c in z:
                if not isinstance(c, Real) or not 0.0 <= c < 1.0:
                    raise InvalidPointError(f"coordinate {c!r} is not in [0, 1)")
            z = tuple(float(c) for c in z)
        return z


def apply_product(sys: System, z, n: int) -> ProductPoint:
    """Return ``Phi^n z = (T_1^n z_1, ..., T_H^n z_H)`` for any integer ``n``."""
    z = sys.check_point(z)
    return tuple(t.power(c, n) for t, c in zip(sys.maps, z))


def circle_close(a: ProductPoint, b: ProductPoint, tol: float = CIRCLE_TOL) -> bool:
    """Compare circle points coordinatewise modulo 1."""
    for x, y in zip(a, b):
        d = abs(x - y) % 1.0
        if min(d, 1.0 - d) > tol:
            return False
    return True


@dataclass(frozen=True)
class Orbit:
    periodic: bool
    points: tuple
    period: int | None = None


def orbit_of(sys: System, z, horizon: int | None = None) -> Orbit:
    """Materialize the orbit of ``z`` under ``Phi``.

    On finite systems this is the cycle ``z, Phi z, ..., Phi^{P-1} z`` found by
    iterating until the first return (``horizon`` is ignored). On the circle it
    is the window ``Phi^{-horizon} z, ..., Phi^{horizon} z``.
    """
    if horizon is not None and horizon <= 0:
        raise ParameterError("horizon must be a positive integer")
    z = sys.check_point(z)
    if sys.is_finite:
        cycle = [z]
        w = apply_product(sys, z, 1)
        while w != z:
            cycle.append(w)
            w = apply_product(sys, w, 1)
        return Orbit(periodic=True, points=tuple(cycle), period=len(cycle))
    if horizon is None:
        raise ParameterError("circle orbits need a horizon")
    points = tuple(apply_product(sys, z, n) for n in range(-horizon, horizon + 1))
    return Orbit(periodic=False, points=points)

"""The diagonal measure and the diagonal-orbit measure of ``Phi``.

``nu`` is the mixture ``(1/3) sum_n 2^{-|n|} (Phi^n)_* mu_Delta``. On finite
systems it is materialized atom by atom with exact geometric-series weights;
on the circle it is only ever sampled.

Functions on a finite support are numpy arrays indexed like
``NuSupport.points``. Exact values live in ``int64`` or ``object`` arrays
(Python ints and Fractions); floats in ``float64`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .systems import ParameterError, System, apply_product

INF = math.inf


def shift_weight(n: int) -> Fraction:
    """Mixture weight ``(1/3) 2^{-|n|}`` of the ``n``-th translate."""
    return Fraction(1, 3 * 2 ** abs(n))


def residue_series(r: int, period: int, exact: bool = True):
    """``sum_{n = r (mod period)} 2^{-|n|}`` over all integers ``n``.

    With ``0 <= r < period`` the nonnegative terms start at ``r`` and the
    negative ones at ``r - period``, so the sum is
    ``(2^{period-r} + 2^r) / (2^period - 1)``.
    """
    r %= period
    if exact:
        return Fraction(2 ** (period - r) + 2**r, 2**period - 1)
    return (2.0 ** (-r) + 2.0 ** (r - period)) / (1.0 - 2.0 ** (-period))


def truncated_residue_series(r: int, period: int, cutoff: int = 60) -> Fraction:
    """Brute-force partial sum of :func:`residue_series` over ``|n| <= cutoff``."""
    return sum(
        (Fraction(1, 2 ** abs(n)) for n in range(-cutoff, cutoff + 1) if (n - r) % period == 0),
        Fraction(0),
    )


@dataclass(frozen=True)
class ShiftProgression:
    """Shifts ``n = residue (mod period)`` with ``Phi^n(x, ..., x)`` at a given point."""

    base: int
    residue: int
    period: int


@dataclass(frozen=True)
class SupportAtom:
    point: tuple
    nu_weight: object
    contributing_shifts: tuple


@dataclass(frozen=True)
class DiagonalAtom:
    base: int
    weight: object


class NuSupport:
    """The finite support of ``nu``: a union of ``Phi``-cycles through the diagonal.

    Iterating yields :class:`SupportAtom` records. ``phi[i]`` is the index of
    ``Phi(points[i])`` and ``phi_inv[i]`` that of ``Phi^{-1}(points[i])``.
    """

    def __init__(self, system: System, points, weights, shifts, cycles, diagonal):
        self.system = system
        self.points = tuple(points)
        self.weights = tuple(weights)
        self.shifts = tuple(tuple(s) for s in shifts)
        self.cycles = tuple(tuple(c) for c in cycles)
        self.diagonal = tuple(diagonal)
        self.index = {z: i for i, z in enumerate(self.points)}
        self.exact = system.exact
        n = len(self.points)
        self.phi = np.empty(n, dtype=np.int64)
        self.cycle_id = np.empty(n, dtype=np.int64)
        for c, cycle in enumerate(self.cycles):
            for j, i in enumerate(cycle):
                self.phi[i] = cycle[(j + 1) % len(cycle)]
                self.cycle_id[i] = c
        self.phi_inv = np.empty(n, dtype=np.int64)
        self.phi_inv[self.phi] = np.arange(n)
        self.weight_array = np.array(self.weights, dtype=object if self.exact else float)
        self.live = np.array([w > 0 for w in self.weights], dtype=bool)
        if self.exact:
            # common denominator so that masses of subsets are integer sums
            mu = system.space.weights
            shifted = [
                sum((Fraction(1, 3) * mu[p.base] * residue_series(p.residue - 1, p.period) for p in progs), Fraction(0))
                for progs in self.shifts
            ]
            self.denominator = math.lcm(*(w.denominator for w in (*self.weights, *shifted)))
            self.numerators = np.array([w.numerator * (self.denominator // w.denominator) for w in self.weights], dtype=object)
            self.shifted_numerators = np.array([w.numerator * (self.denominator // w.denominator) for w in shifted], dtype=object)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[SupportAtom]:
        for z, w, s in zip(self.points, self.weights, self.shifts):
            yield SupportAtom(z, w, s)

    def __getitem__(self, i: int) -> SupportAtom:
        return SupportAtom(self.points[i], self.weights[i], self.shifts[i])

    def weight(self, z) -> object:
        i = self.index.get(tuple(z))
        if i is None:
            return Fraction(0) if self.exact else 0.0
        return self.weights[i]

    def total(self):
        return sum(self.weights, Fraction(0) if self.exact else 0.0)

    @property
    def periods(self) -> tuple:
        return tuple(len(c) for c in self.cycles)

    @property
    def period_lcm(self) -> int:
        return math.lcm(*self.periods)

    def phi_power(self, n: int) -> np.ndarray:
        """Index array of ``Phi^n`` on the support."""
        out = np.arange(len(self))
        step = self.phi if n >= 0 else self.phi_inv
        # cycles are short, so reduce n modulo the lcm first
        for _ in range(abs(n) % self.period_lcm):
            out = step[out]
        return out

    def tabulate(self, func: Callable) -> np.ndarray:
        """Evaluate ``func`` at every support point."""
        return as_values([func(z) for z in self.points])

    def compose(self, values: np.ndarray, n: int = 1) -> np.ndarray:
        """``values o Phi^n``."""
        return np.asarray(values)[self.phi_power(n)]

    def indicator(self, points) -> np.ndarray:
        out = np.zeros(len(self), dtype=np.int64)
        for z in points:
            out[self.index[tuple(z)]] = 1
        return out

    def diagonal_atoms(self) -> list[DiagonalAtom]:
        return [DiagonalAtom(x, self.system.space.weights[x]) for x in range(self.system.space.size)]


def as_values(values: Sequence) -> np.ndarray:
    """Pack function values into the narrowest exact-or-float numpy array."""
    values = list(values)
    if all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in values):
        if all(-(2**62) < int(v) < 2**62 for v in values):
            return np.array(values, dtype=np.int64)
        return np.array([int(v) for v in values], dtype=object)
    if any(isinstance(v, Fraction) for v in values):
        return np.array([Fraction(v) for v in values], dtype=object)
    return np.array(values, dtype=float)


def is_exact(values: np.ndarray) -> bool:
    return values.dtype != float


def scale(values: np.ndarray, num: int, den: int = 1) -> np.ndarray:
    """``values * num / den`` keeping exact arrays exact."""
    if values.dtype == float:
        return values * (num / den)
    return values.astype(object) * Fraction(num, den)


@lru_cache(maxsize=128)
def build_nu_support(sys: System) -> NuSupport:
    """Enumerate the support of ``nu`` on a finite system with exact weights.

    Each diagonal atom ``(x, ..., x)`` with ``mu(x) > 0`` lies on a
    ``Phi``-cycle of length ``P``; the shifts landing on the ``r``-th cycle
    point form the progression ``r (mod P)`` and contribute
    ``mu(x) / 3 * residue_series(r, P)``.
    """
    if not sys.is_finite:
        raise ParameterError("the support of nu is only enumerable on finite systems")
    exact = sys.exact
    weights_mu = sys.space.weights
    points: list = []
    index: dict = {}
    nu: list = []
    shifts: list = []
    cycles: list = []
    diagonal: list = []
    third = Fraction(1, 3) if exact else 1.0 / 3.0
    for x in range(sys.space.size):
        if weights_mu[x] == 0:
            continue
        d = sys.diagonal(x)
        if d not in index:
            cycle = []
            z = d
            while True:
                index[z] = len(points)
                points.append(z)
                nu.append(Fraction(0) if exact else 0.0)
                shifts.append([])
                cycle.append(index[z])
                z = apply_product(sys, z, 1)
                if z == d:
                    break
            cycles.append(cycle)
        diagonal.append(index[d])
        cycle = next(c for c in cycles if index[d] in c)
        P = len(cycle)
        start = cycle.index(index[d])
        for r in range(P):
            i = cycle[(start + r) % P]
            nu[i] += third * weights_mu[x] * residue_series(r, P, exact)
            shifts[i].append(ShiftProgression(x, r, P))
    return NuSupport(sys, points, nu, shifts, cycles, diagonal)


def nu_measure(support: NuSupport, members) -> object:
    """``nu(A)`` for a boolean mask or collection of points ``A``."""
    mask = _mask(support, members)
    if support.exact:
        return Fraction(int(support.numerators[mask].sum()), support.denominator)
    return sum((w for w, m in zip(support.weights, mask) if m), Fraction(0) if support.exact else 0.0)


def preimage(support: NuSupport, members) -> np.ndarray:
    """Mask of ``Phi^{-1} A = {z : Phi z in A}``."""
    return _mask(support, members)[support.phi]


def nu_preimage_by_shift(support: NuSupport, members) -> object:
    """``nu(Phi^{-1} A)`` by re-weighting shifts instead of moving ``A``.

    ``nu(Phi^{-1} A) = (1/3) sum_n 2^{-|n-1|} mu_Delta(Phi^{-n} A)``, so a
    progression ``r (mod P)`` now carries ``residue_series(r - 1, P)``.
    """
    mask = _mask(support, members)
    exact = support.exact
    if exact:
        return Fraction(int(support.shifted_numerators[mask].sum()), support.denominator)
    mu = support.system.space.weights
    third = Fraction(1, 3) if exact else 1.0 / 3.0
    total = Fraction(0) if exact else 0.0
    for i in np.flatnonzero(mask):
        for s in support.shifts[i]:
            total += third * mu[s.base] * residue_series(s.residue - 1, s.period, exact)
    return total


def _mask(support: NuSupport, members) -> np.ndarray:
    if isinstance(members, np.ndarray) and members.dtype == bool:
        return members
    mask = np.zeros(len(support), dtype=bool)
    for z in members:
        i = support.index.get(tuple(z))
        if i is not None:
            mask[i] = True
    return mask


@dataclass(frozen=True)
class NuSample:
    point: tuple
    shift: int
    base: object


@dataclass
class NuSampleBatch:
    """``count`` i.i.d. draws from ``nu`` stored column-wise."""

    shifts: np.ndarray
    bases: np.ndarray
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.shifts)

    def __getitem__(self, k: int) -> NuSample:
        point = tuple(self.points[k].tolist())
        base = self.bases[k].item()
        return NuSample(point, int(self.shifts[k]), base)

    def __iter__(self) -> Iterator[NuSample]:
        for k in range(len(self)):
            yield self[k]


def two_sided_geometric(u_mag: np.ndarray, u_sign: np.ndarray) -> np.ndarray:
    """Inverse CDF of ``P(n) = (1/3) 2^{-|n|}`` from two uniform streams.

    ``|n| = 0`` with probability 1/3; otherwise ``P(|n| <= k) = 1 - (2/3) 2^{-k}``
    gives ``|n| = floor(-log2(1.5 (1 - u))) + 1``.
    """
    mag = np.zeros(u_mag.shape, dtype=np.int64)
    tail = u_mag >= 1.0 / 3.0
    mag[tail] = np.floor(-np.log2(1.5 * (1.0 - u_mag[tail]))).astype(np.int64) + 1
    mag = np.maximum(mag, tail.astype(np.int64))
    sign = np.where(u_sign < 0.5, 1, -1)
    return mag * sign


def sample_nu(sys: System, rng_seed, count: int) -> NuSampleBatch:
    """Draw ``n`` from the two-sided geometric law, ``x`` from ``mu``, return ``Phi^n(x, ..., x)``."""
    if count < 1:
        raise ParameterError("count must be at least 1")
    rng = np.random.default_rng(rng_seed)
    shifts = two_sided_geometric(rng.random(count), rng.random(count))
    u_base = rng.random(count)
    if sys.is_finite:
        cdf = np.cumsum([float(w) for w in sys.space.weights])
        bases = np.minimum(np.searchsorted(cdf, u_base, side="right"), sys.space.size - 1)
        points = np.empty((count, sys.H), dtype=np.int64)
        pairs, inverse = np.unique(np.stack([bases, shifts], axis=1), axis=0, return_inverse=True)
        images = np.array([apply_product(sys, sys.diagonal(int(x)), int(n)) for x, n in pairs], dtype=np.int64)
        points[:] = images[np.asarray(inverse).reshape(-1)]
    else:
        bases = u_base
        alphas = np.array([t.alpha for t in sys.maps])
        points = (bases[:, None] + shifts[:, None] * alphas[None, :]) % 1.0
    return NuSampleBatch(shifts, bases, points)


@dataclass(frozen=True)
class NormEstimate:
    """Monte Carlo ``L^p(nu)`` norm; for ``p = inf`` the value is only a lower bound."""

    value: float
    stderr: float
    p: float
    count: int
    lower_bound: bool = False


def _check_p(p) -> float:
    p = float(p)
    if not p >= 1:
        raise ParameterError(f"p must be at least 1, got {p}")
    return p


def lp_norm_weighted(values: np.ndarray, weights: np.ndarray, p, live: np.ndarray | None = None) -> object:
    """``(sum |G|^p w)^{1/p}`` over atoms with positive weight, or their max ``|G|`` for ``p = inf``.

    Exact inputs give exact results whenever ``p`` is 1 or infinite.
    """
    p = _check_p(p)
    values = np.asarray(values)
    if live is None:
        live = np.array([w > 0 for w in weights], dtype=bool)
    mags = np.abs(values[live])
    if p == INF:
        if len(mags) == 0:
            return 0
        return _scalar(mags.max())
    if p == 1:
        return _scalar((mags * weights[live]).sum())
    total = (mags**int(p) if p.is_integer() else mags.astype(float) ** p) * weights[live]
    return float(total.sum()) ** (1.0 / p)


def lp_norm_nu(sys: System, G, p, *, support: NuSupport | None = None, seed=None, count: int = 100_000):
    """``||G||_{L^p(nu)}``.

    Finite systems: exact over the support. ``G`` may be an array indexed like
    the support, a mapping from points, or a callable on points.

    Circle systems: ``G`` is a vectorized callable on an ``(count, H)`` point
    array; returns a :class:`NormEstimate` from ``count`` samples of ``nu``.
    """
    p = _check_p(p)
    if sys.is_finite:
        support = support or build_nu_support(sys)
        return lp_norm_weighted(support_values(support, G), support.weight_array, p, support.live)
    batch = sample_nu(sys, seed, count)
    mags = np.abs(np.asarray(G(batch.points), dtype=float))
    if p == INF:
        return NormEstimate(float(mags.max()), 0.0, p, count, lower_bound=True)
    powered = mags**p
    mean = powered.mean()
    se_mean = powered.std(ddof=1) / math.sqrt(count) if count > 1 else 0.0
    value = mean ** (1.0 / p)
    # delta method for the p-th root
    stderr = se_mean * value / (p * mean) if mean > 0 else 0.0
    return NormEstimate(float(value), float(stderr), p, count)


def _scalar(x):
    return x.item() if isinstance(x, np.generic) else x


def support_values(support: NuSupport, G) -> np.ndarray:
    if isinstance(G, np.ndarray):
        if len(G) != len(support):
            raise ValueError("value array does not match the support size")
        return G
    if isinstance(G, dict):
        zero = 0
        return as_values([G.get(z, zero) for z in support.points])
    if callable(G):
        return support.tabulate(G)
    return as_values(list(G))


@dataclass
class NonsingularityReport:
    trials: int
    min_ratio: object
    max_ratio: object
    violations: list = field(default_factory=list)
    shift_mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.shift_mismatches


def check_nonsingularity(sys: System, trials: int, seed=0, *, support: NuSupport | None = None) -> NonsingularityReport:
    """Check ``nu(A)/3 <= nu(Phi^{-1} A) <= 2 nu(A)`` on random subsets of the support.

    The empty set and the full support are always included. Each ``nu(Phi^{-1} A)``
    is computed both by moving ``A`` and by re-weighting shifts; the two must agree.
    """
    support = support or build_nu_support(sys)
    rng = np.random.default_rng(seed)
    n = len(support)
    masks = [np.zeros(n, dtype=bool), np.ones(n, dtype=bool)]
    masks += [rng.random(n) < 0.5 for _ in range(trials)]
    tol = 0 if support.exact else 1e-12
    lo = hi = None
    report = NonsingularityReport(trials=len(masks), min_ratio=None, max_ratio=None)
    for mask in masks:
        a = nu_measure(support, mask)
        b = nu_measure(support, preimage(support, mask))
        b_shift = nu_preimage_by_shift(support, mask)
        if abs(b - b_shift) > tol:
            report.shift_mismatches.append((np.flatnonzero(mask).tolist(), b, b_shift))
        if not (a / 3 - tol <= b <= 2 * a + tol):
            report.violations.append((np.flatnonzero(mask).tolist(), a, b))
        if a > 0:
            ratio = b / a
            lo = ratio if lo is None else min(lo, ratio)
            hi = ratio if hi is None else max(hi, ratio)
    report.min_ratio, report.max_ratio = lo, hi
    return report


def divergence_set(sequence: np.ndarray, tail: int) -> np.ndarray:
    """Points where a sequence of support functions fails to settle.

    ``sequence`` has shape ``(K, len(support))``. A column converges when it is
    constant over its last ``tail`` entries; the generators used with this
    helper are eventually constant or eventually oscillating, so the test is exact.
    """
    last = sequence[-tail:]
    return ~np.all(last == last[0], axis=0)


def compose_sequence(support: NuSupport, sequence: np.ndarray) -> np.ndarray:
    """``G_k = F_k o Phi`` for every term of the sequence."""
    return sequence[:, support.phi]


def random_sequence(support: NuSupport, rng, length: int = 40, tail: int = 10) -> np.ndarray:
    """Integer sequences that are eventually constant or eventually 2-periodic per point."""
    n = len(support)
    seq = rng.integers(-5, 6, size=(length, n))
    diverge = rng.random(n) < 0.3
    limit = rng.integers(-5, 6, size=n)
    seq[-tail:] = limit
    amp = rng.integers(1, 4, size=n)
    alternating = np.where(np.arange(tail)[:, None] % 2 == 0, amp, -amp)
    seq[-tail:, diverge] = limit[diverge] + alternating[:, diverge]
    return seq


def mu_delta_pullback_counterexample(sys: System):
    """A ``mu_Delta``-null point whose ``Phi``-preimage has positive ``mu_Delta`` mass.

    Returns ``(point, preimage_point)`` or ``None`` when ``Phi`` maps the
    diagonal into itself (then no such single point exists).
    """
    if not sys.is_finite:
        raise ParameterError("finite systems only")
    for x, w in enumerate(sys.space.weights):
        if w == 0:
            continue
        d = sys.diagonal(x)
        image = apply_product(sys, d, 1)
        if len(set(image)) > 1:
            return image, d
    return None

"""Tensor observables and their nonconventional ergodic sums.

``S_N(z) = sum_{n=1}^N F(Phi^n z)`` with ``F = f_1 (x) ... (x) f_H``; the
``start_index=0`` variant ``sum_{j=0}^{N-1} F(Phi^j z)`` is what the averaging
construction in :mod:`diagorbit.coboundary` uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .measures import (
    INF,
    NuSupport,
    as_values,
    build_nu_support,
    lp_norm_weighted,
    sample_nu,
)
from .systems import ParameterError, System, apply_product


@dataclass(frozen=True)
class TensorObservable:
    """``F(z) = prod_i f_i(z_i)``.

    On finite systems each factor is a value table over the atoms. On the
    circle each factor is a callable accepting floats or numpy arrays, and
    ``factor_bounds`` must be supplied.
    """

    factors: tuple
    factor_bounds: tuple | None = None
    tensor: bool = field(default=True, init=False)

    def __post_init__(self):
        factors = tuple(f if callable(f) else tuple(f) for f in self.factors)
        if not factors:
            raise ValueError("need at least one factor")
        object.__setattr__(self, "factors", factors)
        if self.factor_bounds is None:
            if any(callable(f) for f in factors):
                raise ValueError("callable factors need explicit bounds")
            bounds = tuple(max(abs(v) for v in f) for f in factors)
            object.__setattr__(self, "factor_bounds", bounds)

    @property
    def H(self) -> int:
        return len(self.factors)

    @property
    def bound(self):
        return math.prod(self.factor_bounds)

    def __call__(self, z):
        out = 1
        for f, c in zip(self.factors, z):
            out = out * (f(c) if callable(f) else f[c])
        return out

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on an ``(count, H)`` array of points."""
        out = None
        for i, f in enumerate(self.factors):
            col = points[:, i]
            vals = np.asarray(f(col), dtype=float) if callable(f) else as_values(f)[col.astype(np.int64)]
            out = vals if out is None else out * vals
        return out


@dataclass(frozen=True)
class SupportObservable:
    """A general (not necessarily tensor) function on a finite support."""

    values: dict
    tensor: bool = field(default=False, init=False)

    @property
    def bound(self):
        return max((abs(v) for v in self.values.values()), default=0)

    def __call__(self, z):
        return self.values[tuple(z)]


def eval_F(obs, z):
    return obs(z)


@dataclass(frozen=True)
class SumSeries:
    start: tuple
    values: tuple
    running_sup: tuple
    start_index: int = 1

    @property
    def sup(self):
        return self.running_sup[-1]


def ergodic_sums(sys: System, obs, z, N_max: int, start_index: int = 1) -> SumSeries:
    """Run the recurrence ``S_n = S_{n-1} + F(Phi^{n + start_index - 1} z)`` up to ``N_max``."""
    if N_max < 1:
        raise ParameterError("N_max must be at least 1")
    if start_index not in (0, 1):
        raise ParameterError("start_index must be 0 or 1")
    z = sys.check_point(z)
    s = 0
    sup = 0
    values, sups = [], []
    for n in range(1, N_max + 1):
        s = s + obs(apply_product(sys, z, n + start_index - 1))
        sup = max(sup, abs(s))
        values.append(s)
        sups.append(sup)
    return SumSeries(z, tuple(values), tuple(sups), start_index)


def support_sums(support: NuSupport, F: np.ndarray, N_max: int, start_index: int = 1) -> Iterator[tuple]:
    """Yield ``(N, S_N)`` with ``S_N`` as a whole-support array, for ``N = 1..N_max``."""
    cur = F[support.phi] if start_index == 1 else np.asarray(F)
    s = np.zeros_like(cur)
    for N in range(1, N_max + 1):
        s = s + cur
        yield N, s
        cur = cur[support.phi]


def sampled_sums(sys: System, obs, points: np.ndarray, N_max: int) -> Iterator[tuple]:
    """Circle analogue of :func:`support_sums` on sampled points."""
    alphas = np.array([t.alpha for t in sys.maps])
    s = np.zeros(len(points))
    for N in range(1, N_max + 1):
        s = s + obs.evaluate((points + N * alphas) % 1.0)
        yield N, s


def cycle_sums(support: NuSupport, F: np.ndarray) -> list:
    """Sum of ``F`` around every ``Phi``-cycle of the support."""
    return [sum(F[list(c)].tolist(), 0) for c in support.cycles]


def tabulate(support: NuSupport, obs) -> np.ndarray:
    if isinstance(obs, np.ndarray):
        return obs
    return support.tabulate(obs)


def growth_slope(Ns: Sequence[int], norms: Sequence[float]) -> float:
    """Least-squares slope of norm against ``N`` over the top half of the range."""
    Ns = np.asarray(Ns, dtype=float)
    norms = np.asarray([float(v) for v in norms])
    half = len(Ns) // 2
    Ns, norms = Ns[half:], norms[half:]
    if len(Ns) < 2:
        return 0.0
    return float(np.polyfit(Ns, norms, 1)[0])


@dataclass
class SupNormReport:
    p: float
    Ns: list
    norms: list
    sup: object
    slope: float
    bounded_looking: bool
    decided_bounded: bool | None = None
    stderrs: list | None = None


def sup_norm_diagnostic(
    sys: System,
    obs,
    N_max: int,
    p=INF,
    *,
    support: NuSupport | None = None,
    seed=None,
    count: int = 10_000,
) -> SupNormReport:
    """Tabulate ``||S_N||_{L^p(nu)}`` for ``N <= N_max``.

    Finite systems are exact, and boundedness of ``sup_N ||S_N||`` is decided
    from the cycle sums (``decided_bounded``). Circle systems are sampled; the
    report is then a diagnostic only and ``p = inf`` values are lower bounds.
    """
    p = float(p)
    if p < 1:
        raise ParameterError("p must be at least 1")
    Ns, norms, errs = [], [], []
    if sys.is_finite:
        support = support or build_nu_support(sys)
        F = tabulate(support, obs)
        weights = support.weight_array
        for N, s in support_sums(support, F, N_max):
            Ns.append(N)
            norms.append(lp_norm_weighted(s, weights, p, support.live))
        bound = max(abs(v) for v in F.tolist()) if len(F) else 0
        tol = 0 if F.dtype != float else 1e-12 * max(1.0, bound) * max(support.periods)
        decided = all(abs(c) <= tol for c in cycle_sums(support, F))
        stderrs = None
    else:
        batch = sample_nu(sys, seed, count)
        for N, s in sampled_sums(sys, obs, batch.points, N_max):
            Ns.append(N)
            mags = np.abs(s)
            if p == INF:
                norms.append(float(mags.max()))
                errs.append(0.0)
            else:
                powered = mags**p
                mean = powered.mean()
                value = mean ** (1.0 / p)
                se = powered.std(ddof=1) / math.sqrt(count) if count > 1 else 0.0
                norms.append(float(value))
                errs.append(float(se * value / (p * mean)) if mean > 0 else 0.0)
        decided = None
        bound = obs.bound
        stderrs = errs
    slope = growth_slope(Ns, norms)
    return SupNormReport(
        p=p,
        Ns=Ns,
        norms=norms,
        sup=max(norms, default=0),
        slope=slope,
        bounded_looking=slope < 1e-6 * float(bound) if bound else True,
        decided_bounded=decided,
        stderrs=stderrs,
    )


@dataclass
class ShiftedSumReport:
    """Both forms of the shifted-sum sufficient condition.

    ``pair_sup`` is ``sup_{1<=N<=N_max, |m|<=M_max} ||sum_{n=1}^N F o Phi^{n+m}||_{L^p(mu)}``
    on the diagonal. ``single_sup`` is ``sup_k ||Q_k||_{L^p(mu)}`` for the
    cumulative sums ``Q_k = sum_{n=0}^k F o Phi^n`` (``k >= 0``) extended by
    ``Q_k - Q_{k-1} = F o Phi^k`` to negative ``k``, over
    ``-M_max-1 <= k <= N_max+M_max``; ``single_sup_forward`` restricts to
    ``0 <= k <= N_max``. Since each pair sum is ``Q_{m+N} - Q_m``,
    ``pair_sup <= 2 single_sup`` must hold.
    """

    p: float
    N_max: int
    M_max: int
    pair_sup: object
    single_sup: object
    single_sup_forward: object
    pair_argmax: tuple

    @property
    def consistent(self) -> bool:
        return self.pair_sup <= 2 * self.single_sup


def shifted_sum_condition(sys: System, obs, N_max: int, M_max: int, p=INF, *, support: NuSupport | None = None) -> ShiftedSumReport:
    """Evaluate the shifted-sum condition with ``L^p(mu)`` norms on the diagonal."""
    if not sys.is_finite:
        raise ParameterError("the shifted-sum check needs a finite system")
    if N_max < 1 or M_max < 0:
        raise ParameterError("need N_max >= 1 and M_max >= 0")
    p = float(p)
    support = support or build_nu_support(sys)
    F = tabulate(support, obs)
    diag = np.array(support.diagonal, dtype=np.int64)
    mu = np.array(
        [w for w in sys.space.weights if w > 0],
        dtype=object if sys.exact else float,
    )

    live = np.ones(len(mu), dtype=bool)

    def norm(values):
        return lp_norm_weighted(values, mu, p, live)

    def at(k):
        return diag if k == 0 else support.phi_power(k)[diag]

    pair_sup, argmax = 0, (0, 0)
    for m in range(-M_max, M_max + 1):
        idx = at(m + 1)
        s = np.zeros(len(diag), dtype=F.dtype)
        for N in range(1, N_max + 1):
            s = s + F[idx]
            val = norm(s)
            if val > pair_sup:
                pair_sup, argmax = val, (N, m)
            idx = support.phi[idx]

    q = {-1: np.zeros(len(diag), dtype=F.dtype)}
    idx = diag
    for k in range(0, N_max + M_max + 1):
        q[k] = q[k - 1] + F[idx]
        idx = support.phi[idx]
    idx = support.phi_inv[diag]
    for k in range(-1, -M_max - 2, -1):
        q[k - 1] = q[k] - F[idx]
        idx = support.phi_inv[idx]
    norms = {k: norm(v) for k, v in q.items() if k >= -M_max - 1}
    return ShiftedSumReport(
        p=p,
        N_max=N_max,
        M_max=M_max,
        pair_sup=pair_sup,
        single_sup=max(norms.values()),
        single_sup_forward=max(v for k, v in norms.items() if 0 <= k <= N_max),
        pair_argmax=argmax,
    )

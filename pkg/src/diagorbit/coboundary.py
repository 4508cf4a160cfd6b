"""Solving ``F = V - V o Phi`` on the support of ``nu``.

Two independent routes produce a transfer function ``V`` on finite systems:

* :func:`solve_orbit` walks every ``Phi``-cycle and inverts partial sums;
* :func:`komlos_construct` forms the double averages
  ``D_N = (1/N) sum_{n=1}^N sum_{j=0}^{n-1} F o Phi^j`` along a subsequence
  ``N_k`` and takes their Cesaro mean.

On a cycle the two differ by a constant, which is what the agreement checks
compare.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measures import (
    INF,
    NuSupport,
    as_values,
    build_nu_support,
    lp_norm_weighted,
    scale,
    support_values,
)
from .sums import cycle_sums, support_sums, sup_norm_diagnostic, tabulate
from .systems import ParameterError, System, apply_product


class Status(str, enum.Enum):
    COBOUNDARY = "Coboundary"
    NOT_A_COBOUNDARY = "NotACoboundary"
    UNDETERMINED = "Undetermined"


@dataclass
class CoboundaryCertificate:
    status: Status
    V: np.ndarray | None
    residual_sup: object
    v_sup: object
    v_l1: object
    per_orbit_constants: list
    support: NuSupport | None = None
    witness: dict | None = None
    note: str = ""


@dataclass
class KomlosTrace:
    subsequence: list
    D: list
    V_K: np.ndarray | None
    increments: list
    correction: np.ndarray | None


def _tolerance(F: np.ndarray, tol) -> float:
    if tol is not None:
        return tol
    if F.dtype != float:
        return 0
    return 1e-12 * max(1.0, float(np.abs(F).max(initial=0.0)))


def residual(support: NuSupport, F: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``F - (V - V o Phi)`` on the support."""
    return F - (V - V[support.phi])


def _summary(support, F, V):
    weights, live = support.weight_array, support.live
    res = residual(support, F, V)
    return (
        lp_norm_weighted(res, weights, INF, live),
        lp_norm_weighted(V, weights, INF, live),
        lp_norm_weighted(V, weights, 1, live),
    )


def solve_orbit(
    sys: System,
    obs,
    *,
    support: NuSupport | None = None,
    constants: Sequence | None = None,
    tol=None,
) -> CoboundaryCertificate:
    """Exact orbit solver.

    On each cycle ``z_0 -> ... -> z_{P-1}`` with zero cycle sum, set
    ``V(z_0) = c`` and ``V(z_{j+1}) = V(z_j) - F(z_j)``. A nonzero cycle sum is
    an obstruction: summing the equation around the cycle forces it to vanish.
    """
    if not sys.is_finite:
        raise ParameterError("the orbit solver needs a finite system; see circle_partial_solver")
    support = support or build_nu_support(sys)
    F = tabulate(support, obs)
    tol = _tolerance(F, tol)
    sums = cycle_sums(support, F)
    for c, s in enumerate(sums):
        if abs(s) > tol:
            return CoboundaryCertificate(
                status=Status.NOT_A_COBOUNDARY,
                V=None,
                residual_sup=None,
                v_sup=None,
                v_l1=None,
                per_orbit_constants=[],
                support=support,
                witness={"cycle": c, "points": [support.points[i] for i in support.cycles[c]], "cycle_sum": s},
            )
    constants = list(constants) if constants is not None else [0] * len(support.cycles)
    if len(constants) != len(support.cycles):
        raise ValueError("need one constant per cycle")
    values = [0] * len(support)
    Fl = F.tolist()
    for cycle, c in zip(support.cycles, constants):
        v = c
        for i in cycle:
            values[i] = v
            v = v - Fl[i]
    V = as_values(values)
    res, vs, v1 = _summary(support, F, V)
    status = Status.COBOUNDARY if res <= tol else Status.UNDETERMINED
    return CoboundaryCertificate(status, V, res, vs, v1, constants, support)


def double_average(support: NuSupport, F: np.ndarray, N: int) -> np.ndarray:
    """``D_N = (1/N) sum_{n=1}^N sum_{j=0}^{n-1} F o Phi^j``, evaluated in closed form per cycle.

    On a cycle of length ``P`` with cycle sum ``c`` and in-cycle partial sums
    ``a_j(s)``, ``sum_{j<n} F o Phi^j (z_j) = (n // P) c + a_j(n % P)``, so the
    outer sum over ``n = 0..N`` collapses to
    ``c P q(q-1)/2 + q A_j + (r+1) q c + sum_{s<=r} a_j(s)`` with ``N = qP + r``.
    """
    out = [0] * len(support)
    Fl = F.tolist()
    for cycle in support.cycles:
        P = len(cycle)
        vals = [Fl[i] for i in cycle] * 3
        # G[k] = sum of the first k entries of the tripled cycle
        G = [0]
        for v in vals:
            G.append(G[-1] + v)
        Hc = [0]
        for g in G:
            Hc.append(Hc[-1] + g)
        c = G[P]
        q, r = divmod(N, P)
        for j, i in enumerate(cycle):
            # a_j(s) = G[j+s] - G[j]
            A = Hc[j + P] - Hc[j] - P * G[j]
            head = Hc[j + r + 1] - Hc[j] - (r + 1) * G[j]
            out[i] = c * P * (q * (q - 1) // 2) + q * A + (r + 1) * q * c + head
    total = as_values(out)
    return scale(total, 1, N)


def komlos_subsequence(K: int, rule="pow2_aligned", period_lcm: int = 1) -> list:
    """``N_k`` for ``k = 1..K``.

    ``pow2`` is ``2^k``; ``pow2_aligned`` rounds ``2^k`` up to a multiple of
    ``period_lcm`` and keeps the sequence strictly increasing. An explicit
    sequence of integers is used as given.
    """
    if K < 1:
        raise ParameterError("K must be at least 1")
    if not isinstance(rule, str):
        Ns = [int(n) for n in rule][:K]
        if len(Ns) < K or any(n < 1 for n in Ns):
            raise ParameterError("explicit subsequence needs K positive entries")
        return Ns
    if rule == "pow2":
        return [2**k for k in range(1, K + 1)]
    if rule == "pow2_aligned":
        Ns = []
        for k in range(1, K + 1):
            n = -(-(2**k) // period_lcm) * period_lcm
            if Ns and n <= Ns[-1]:
                n = Ns[-1] + period_lcm
            Ns.append(n)
        return Ns
    raise ParameterError(f"unknown subsequence rule {rule!r}")


def komlos_construct(
    sys: System,
    obs,
    K: int = 8,
    rule="pow2_aligned",
    *,
    support: NuSupport | None = None,
    tol=None,
) -> tuple[CoboundaryCertificate, KomlosTrace]:
    """Transfer function as the Cesaro mean of the double averages ``D_{N_k}``.

    Each ``D_N`` satisfies ``D_N - D_N o Phi = F - S_N / N`` exactly, so
    ``V_K - V_K o Phi = F - correction`` with
    ``correction = (1/K) sum_k S_{N_k} / N_k``; this identity is asserted.
    With period-aligned ``N_k`` and zero cycle sums the correction vanishes.
    """
    if not sys.is_finite:
        raise ParameterError("the averaging construction needs a finite system")
    support = support or build_nu_support(sys)
    F = tabulate(support, obs)
    tol = _tolerance(F, tol)
    sums = cycle_sums(support, F)
    bad = [c for c, s in enumerate(sums) if abs(s) > tol]
    if bad:
        cert = CoboundaryCertificate(
            status=Status.UNDETERMINED,
            V=None,
            residual_sup=None,
            v_sup=None,
            v_l1=None,
            per_orbit_constants=[],
            support=support,
            witness={"cycle": bad[0], "cycle_sum": sums[bad[0]]},
            note="ergodic sums are unbounded: a cycle sum is nonzero",
        )
        return cert, KomlosTrace([], [], None, [], None)

    Ns = komlos_subsequence(K, rule, support.period_lcm)
    Ds, increments = [], []
    acc = None
    corr_acc = None
    V_prev = None
    for k, N in enumerate(Ns, start=1):
        D = double_average(support, F, N)
        Ds.append(D)
        acc = D if acc is None else acc + D
        V_k = scale(acc, 1, k)
        if V_prev is not None:
            increments.append(lp_norm_weighted(V_k - V_prev, support.weight_array, INF, support.live))
        V_prev = V_k
        S_N = _sum_at(support, F, N)
        term = scale(S_N, 1, N)
        corr_acc = term if corr_acc is None else corr_acc + term
    V = V_prev
    correction = scale(corr_acc, 1, K)
    identity_gap = lp_norm_weighted(residual(support, F, V) - correction, support.weight_array, INF, support.live)
    if identity_gap > tol:
        raise AssertionError(f"averaging identity violated by {identity_gap}")
    res, vs, v1 = _summary(support, F, V)
    status = Status.COBOUNDARY if res <= tol else Status.UNDETERMINED
    constants = [V[cycle[0]].item() if isinstance(V[cycle[0]], np.generic) else V[cycle[0]] for cycle in support.cycles]
    cert = CoboundaryCertificate(status, V, res, vs, v1, constants, support)
    return cert, KomlosTrace(Ns, Ds, V, increments, correction)


def _sum_at(support: NuSupport, F: np.ndarray, N: int) -> np.ndarray:
    """``S_N = sum_{n=1}^N F o Phi^n`` in closed form per cycle."""
    out = [0] * len(support)
    Fl = F.tolist()
    for cycle in support.cycles:
        P = len(cycle)
        vals = [Fl[i] for i in cycle] * 2
        G = [0]
        for v in vals:
            G.append(G[-1] + v)
        q, r = divmod(N, P)
        for j, i in enumerate(cycle):
            # terms j+1 .. j+N of the periodic extension
            out[i] = q * G[P] + G[j + 1 + r] - G[j + 1]
    return as_values(out)


def constant_per_orbit(support: NuSupport, diff: np.ndarray, tol=0) -> bool:
    """True if ``diff`` is constant on every ``Phi``-cycle."""
    for cycle in support.cycles:
        vals = diff[list(cycle)]
        if any(abs(v - vals[0]) > tol for v in vals):
            return False
    return True


@dataclass
class VerificationReport:
    residual_ok: bool
    telescoping_ok: bool
    bound_ok: bool
    diagonal_ok: bool
    N_max: int
    max_sum_norm: object
    v_sup: object
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.residual_ok and self.telescoping_ok and self.bound_ok and self.diagonal_ok


def verify_certificate(sys: System, obs, cert: CoboundaryCertificate, N_max: int, *, tol=None) -> VerificationReport:
    """Check a certificate pointwise on the support.

    (a) ``F = V - V o Phi``; (b) ``S_N = V o Phi - V o Phi^{N+1}`` for
    ``1 <= N <= N_max``; (c) ``||S_N||_inf <= 2 ||V||_inf``. The residual is
    also reported separately on diagonal points ``(x, ..., x)``.
    """
    if cert.status != Status.COBOUNDARY or cert.V is None:
        raise ParameterError("only Coboundary certificates can be verified")
    support = cert.support or build_nu_support(sys)
    F = tabulate(support, obs)
    V = cert.V
    tol = _tolerance(F, tol)
    weights = support.weight_array
    failures = []

    res = np.abs(residual(support, F, V))
    bad = [i for i, r in enumerate(res.tolist()) if r > tol]
    for i in bad:
        failures.append({"check": "residual", "point": support.points[i], "N": None, "gap": res[i]})
    diag_bad = [i for i in support.diagonal if res[i] > tol]

    v_sup = lp_norm_weighted(V, weights, INF, support.live)
    V_phi = V[support.phi]
    V_shift = V_phi[support.phi]
    telescoping_ok = True
    bound_ok = True
    max_norm = 0
    for N, s in support_sums(support, F, N_max):
        gap = np.abs(s - (V_phi - V_shift))
        worst = int(np.argmax(gap)) if len(gap) else 0
        if len(gap) and gap[worst] > tol:
            if telescoping_ok:
                failures.append({"check": "telescoping", "point": support.points[worst], "N": N, "gap": gap[worst]})
            telescoping_ok = False
        norm = lp_norm_weighted(s, weights, INF, support.live)
        max_norm = max(max_norm, norm)
        if norm > 2 * v_sup + tol:
            if bound_ok:
                failures.append({"check": "bound", "point": None, "N": N, "gap": norm - 2 * v_sup})
            bound_ok = False
        V_shift = V_shift[support.phi]
    return VerificationReport(
        residual_ok=not bad,
        telescoping_ok=telescoping_ok,
        bound_ok=bound_ok,
        diagonal_ok=not diag_bad,
        N_max=N_max,
        max_sum_norm=max_norm,
        v_sup=v_sup,
        failures=failures,
    )


@dataclass
class ReverseReport:
    ok: bool
    N_max: int
    sup_sum_norm: object
    v_sup: object
    F: np.ndarray


def reverse_direction(sys: System, V, N_max: int, *, support: NuSupport | None = None, tol=None) -> ReverseReport:
    """From a bounded ``V`` build ``F = V - V o Phi`` and check ``sup_N ||S_N||_inf <= 2 ||V||_inf``."""
    support = support or build_nu_support(sys)
    V = support_values(support, V)
    F = V - V[support.phi]
    diag = sup_norm_diagnostic(sys, F, N_max, INF, support=support)
    v_sup = lp_norm_weighted(V, support.weight_array, INF, support.live)
    tol = _tolerance(F, tol)
    return ReverseReport(diag.sup <= 2 * v_sup + tol, N_max, diag.sup, v_sup, F)


@dataclass
class CircleWindowSolution:
    """Partial-sum inversion on ``Phi^n z``, ``-horizon <= n <= horizon``, with ``V(z) = 0``.

    ``window_sup`` is a lower bound for the smallest ``||V||_inf`` on the
    orbit. The status is always Undetermined: no finite window decides
    boundedness.
    """

    shifts: np.ndarray
    points: np.ndarray
    V: np.ndarray
    window_sup: float
    growth_slope: float
    status: Status = Status.UNDETERMINED


def circle_partial_solver(sys: System, obs, z, horizon: int) -> CircleWindowSolution:
    """``V(Phi^n z) = -sum_{j=0}^{n-1} F(Phi^j z)`` for ``n >= 0`` and
    ``V(Phi^{-k} z) = sum_{j=1}^{k} F(Phi^{-j} z)`` for ``k > 0``."""
    if horizon < 1:
        raise ParameterError("horizon must be at least 1")
    z = sys.check_point(z)
    shifts = np.arange(-horizon, horizon + 1)
    if not sys.is_finite:
        alphas = np.array([t.alpha for t in sys.maps])
        points = (np.asarray(z)[None, :] + shifts[:, None] * alphas[None, :]) % 1.0
    else:
        points = np.array([apply_product(sys, z, int(n)) for n in shifts])
    if hasattr(obs, "evaluate") and not sys.is_finite:
        F = np.asarray(obs.evaluate(points), dtype=float)
    else:
        F = np.array([obs(tuple(p)) for p in points.tolist()], dtype=float)
    centre = horizon
    V = np.zeros(len(shifts))
    # forward: V(Phi^{n+1} z) = V(Phi^n z) - F(Phi^n z)
    V[centre + 1 :] = -np.cumsum(F[centre : 2 * horizon])
    # backward: V(Phi^{-k} z) = V(Phi^{-k+1} z) + F(Phi^{-k} z)
    V[:centre] = np.cumsum(F[:centre][::-1])[::-1]
    mags = np.abs(V)
    half = mags[centre:]
    slope = float(np.polyfit(np.arange(len(half)), half, 1)[0]) if len(half) > 1 else 0.0
    return CircleWindowSolution(shifts, points, V, float(mags.max()), slope)

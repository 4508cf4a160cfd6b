import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_systems
from diagorbit.coboundary import (
    CoboundaryCertificate,
    Status,
    circle_partial_solver,
    constant_per_orbit,
    double_average,
    komlos_construct,
    komlos_subsequence,
    residual,
    reverse_direction,
    solve_orbit,
    verify_certificate,
)
from diagorbit.measures import build_nu_support
from diagorbit.planted import GOLDEN, make_planted, planted_from_V
from diagorbit.sums import TensorObservable, ergodic_sums, sup_norm_diagnostic
from diagorbit.systems import ParameterError, System, apply_product

ONES = TensorObservable(((1, 1, 1, 1), (1, 1, 1, 1)))
ZEROS = TensorObservable(((0, 0, 0, 0), (1, 1, 1, 1)))
COB = TensorObservable(((1, 0, 0, -1), (1, 1, 1, 1)))


def test_solve_zero(z4):
    cert = solve_orbit(z4, ZEROS)
    assert cert.status == Status.COBOUNDARY
    assert not cert.V.any() and cert.residual_sup == 0


def test_solve_hand_example(z4):
    support = build_nu_support(z4)
    F = support.indicator([(0, 0)]) - support.indicator([(1, 2)])
    cert = solve_orbit(z4, F)
    assert cert.status == Status.COBOUNDARY and cert.residual_sup == 0
    cycle = [(0, 0), (1, 2), (2, 0), (3, 2)]
    assert [cert.V[support.index[z]] for z in cycle] == [0, -1, 0, 0]


def test_solve_constant_is_obstructed(z4):
    cert = solve_orbit(z4, ONES)
    assert cert.status == Status.NOT_A_COBOUNDARY
    assert cert.witness["cycle_sum"] == 4 and len(cert.witness["points"]) == 4
    assert cert.V is None


def test_per_orbit_constants(z4):
    base = solve_orbit(z4, COB)
    shifted = solve_orbit(z4, COB, constants=[5, Fraction(1, 3), -2, 0])
    assert shifted.residual_sup == 0
    diff = shifted.V - base.V
    support = build_nu_support(z4)
    for cycle, c in zip(support.cycles, [5, Fraction(1, 3), -2, 0]):
        assert all(diff[i] == c for i in cycle)
    with pytest.raises(ValueError):
        solve_orbit(z4, COB, constants=[0])


def test_solve_rejects_circle():
    with pytest.raises(ParameterError):
        solve_orbit(System.rotations([0.1]), lambda z: 0)


def test_solve_float_values():
    sys = System.finite([[1, 2, 0]])
    support = build_nu_support(sys)
    V = np.array([0.1, 0.7, -0.3])
    planted = planted_from_V(sys, V)
    cert = solve_orbit(sys, planted.observable)
    assert cert.status == Status.COBOUNDARY and cert.residual_sup <= 1e-12


def brute_double_average(sys, F, z, N):
    total = 0
    for n in range(1, N + 1):
        total += ergodic_sums(sys, F, z, n, start_index=0).values[-1]
    return Fraction(total, N)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8, 13])
def test_double_average_closed_form(z4, N):
    support = build_nu_support(z4)
    obs = TensorObservable(((2, -1, 0, 3), (1, 1, -1, 2)))
    D = double_average(support, support.tabulate(obs), N)
    for i, z in enumerate(support.points):
        assert D[i] == brute_double_average(z4, obs, z, N)


def test_komlos_zero(z4):
    cert, trace = komlos_construct(z4, ZEROS, K=4)
    assert cert.status == Status.COBOUNDARY
    assert all(v == 0 for v in cert.V) and cert.residual_sup == 0


def test_komlos_matches_cycle_average(z4):
    cert, trace = komlos_construct(z4, COB, K=5)
    assert all(N % 4 == 0 for N in trace.subsequence)
    support = build_nu_support(z4)
    for i, z in enumerate(support.points):
        partial = ergodic_sums(z4, COB, z, 4, start_index=0).values
        assert cert.V[i] == Fraction(sum(partial), 4)
    assert cert.residual_sup == 0
    orbit = solve_orbit(z4, COB)
    assert constant_per_orbit(support, cert.V - orbit.V)
    assert all(inc == 0 for inc in trace.increments)


def test_komlos_unbounded_is_undetermined(z4):
    cert, trace = komlos_construct(z4, ONES, K=3)
    assert cert.status == Status.UNDETERMINED and cert.V is None
    assert trace.subsequence == []


def test_komlos_unaligned_correction(z4):
    # N_k = 2^k with k = 1 gives N = 2, not a multiple of the period 4
    cert, trace = komlos_construct(z4, COB, K=1, rule="pow2")
    support = build_nu_support(z4)
    F = support.tabulate(COB)
    assert trace.subsequence == [2]
    assert np.all(residual(support, F, cert.V) == trace.correction)
    assert cert.status == Status.UNDETERMINED and cert.residual_sup > 0
    gaps = [komlos_construct(z4, COB, K=K, rule="pow2")[0].residual_sup for K in (1, 4, 16)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_komlos_sup_norm_control():
    planted = make_planted("finite_random", {"m": 6, "H": 2}, seed=4)
    sys, obs = planted.system, planted.observable
    support = build_nu_support(sys)
    cert, trace = komlos_construct(sys, obs, K=4)
    C = sup_norm_diagnostic(sys, obs, max(trace.subsequence), math.inf).sup
    for D in trace.D:
        assert max(abs(v) for v in D) <= C
    assert cert.v_sup <= C


def test_subsequence_rules():
    assert komlos_subsequence(4, "pow2") == [2, 4, 8, 16]
    assert komlos_subsequence(4, "pow2_aligned", 6) == [6, 12, 18, 24]
    assert komlos_subsequence(3, "pow2_aligned", 3) == [3, 6, 9]
    assert komlos_subsequence(2, [5, 7]) == [5, 7]
    with pytest.raises(ParameterError):
        komlos_subsequence(0)
    with pytest.raises(ParameterError):
        komlos_subsequence(2, "fibonacci")


def test_verify_trivial(z4):
    cert = solve_orbit(z4, ZEROS)
    assert verify_certificate(z4, ZEROS, cert, 10).ok


def test_verify_z4(z4):
    cert = solve_orbit(z4, COB)
    rep = verify_certificate(z4, COB, cert, 32)
    assert rep.ok and rep.max_sum_norm <= 2 * rep.v_sup


def test_verify_detects_corruption(z4):
    cert = solve_orbit(z4, COB)
    support = cert.support
    bad_V = cert.V.copy()
    i = support.index[(1, 2)]
    bad_V[i] += 1
    bad = CoboundaryCertificate(Status.COBOUNDARY, bad_V, None, None, None, [], support)
    rep = verify_certificate(z4, COB, bad, 8)
    assert not rep.residual_ok and not rep.telescoping_ok
    flagged = {f["point"] for f in rep.failures if f["check"] == "residual"}
    assert flagged == {(1, 2), support.points[support.phi_inv[i]]}


def test_verify_requires_coboundary(z4):
    with pytest.raises(ParameterError):
        verify_certificate(z4, ONES, solve_orbit(z4, ONES), 4)


def test_reverse_constant(z4):
    support = build_nu_support(z4)
    rep = reverse_direction(z4, np.full(len(support), 7, dtype=np.int64), 16)
    assert rep.ok and rep.sup_sum_norm == 0 and not rep.F.any()


def test_reverse_random(z4):
    support = build_nu_support(z4)
    V = np.random.default_rng(12).integers(-5, 6, size=len(support))
    rep = reverse_direction(z4, V, 64)
    assert rep.ok and rep.sup_sum_norm <= 2 * rep.v_sup


def test_reverse_indicator(z4):
    support = build_nu_support(z4)
    rep = reverse_direction(z4, support.indicator([(2, 0)]), 64)
    assert rep.ok and rep.sup_sum_norm <= 2


@pytest.mark.parametrize("sys", random_systems(5, seed=77), ids=lambda s: f"m{s.space.size}H{s.H}")
def test_solver_and_komlos_agree(sys):
    support = build_nu_support(sys)
    V = np.random.default_rng(1).integers(-4, 5, size=len(support))
    planted = planted_from_V(sys, V)
    orbit = solve_orbit(sys, planted.observable)
    komlos, _ = komlos_construct(sys, planted.observable, K=4)
    assert orbit.status == komlos.status == Status.COBOUNDARY
    assert constant_per_orbit(support, komlos.V - orbit.V)
    assert constant_per_orbit(support, orbit.V - V)


def test_circle_recovers_planted():
    planted = make_planted("rotation", {"alphas": [GOLDEN]})
    z = (0.123,)
    win = circle_partial_solver(planted.system, planted.observable, z, 50)
    expected = np.cos(2 * np.pi * win.points[:, 0]) - math.cos(2 * math.pi * z[0])
    assert np.max(np.abs(win.V - expected)) <= 1e-9
    assert win.window_sup <= 2 + 1e-9
    assert win.status == Status.UNDETERMINED


def test_circle_zero_and_growth():
    sys = System.rotations([GOLDEN])
    zero = TensorObservable((lambda x: 0.0 * np.asarray(x),), factor_bounds=(0.0,))
    win = circle_partial_solver(sys, zero, (0.5,), 10)
    assert not win.V.any()
    one = TensorObservable((lambda x: 0.0 * np.asarray(x) + 1.0,), factor_bounds=(1.0,))
    win = circle_partial_solver(sys, one, (0.5,), 10)
    assert np.array_equal(np.abs(win.V), np.abs(win.shifts).astype(float))
    assert win.window_sup == 10
    with pytest.raises(ParameterError):
        circle_partial_solver(sys, one, (0.5,), 0)


def test_circle_solution_satisfies_equation():
    planted = make_planted("rotation", {"alphas": [0.3141]})
    sys, obs = planted.system, planted.observable
    win = circle_partial_solver(sys, obs, (0.77,), 20)
    for k in range(len(win.shifts) - 1):
        F = obs(tuple(win.points[k]))
        assert win.V[k] - win.V[k + 1] == pytest.approx(F, abs=1e-12)

import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import brute_nu, random_systems
from diagorbit.measures import (
    NormEstimate,
    build_nu_support,
    check_nonsingularity,
    compose_sequence,
    divergence_set,
    lp_norm_nu,
    mu_delta_pullback_counterexample,
    nu_measure,
    nu_preimage_by_shift,
    preimage,
    random_sequence,
    residue_series,
    sample_nu,
    shift_weight,
    truncated_residue_series,
)
from diagorbit.planted import GOLDEN
from diagorbit.systems import FiniteSpace, ParameterError, System


def test_shift_weight_values():
    assert shift_weight(0) == Fraction(1, 3)
    assert shift_weight(1) == Fraction(1, 6)
    assert shift_weight(-1) == Fraction(1, 6)


def test_shift_weights_sum_to_one():
    partial = sum(shift_weight(n) for n in range(-50, 51))
    assert abs(partial - 1) <= Fraction(1, 2**48)
    # tail beyond |n| <= N is (2/3) 2^{-N}
    assert 1 - partial == Fraction(2, 3 * 2**50)


@pytest.mark.parametrize("period", [1, 2, 3, 4, 7])
def test_residue_series_matches_truncation(period):
    for r in range(period):
        exact = residue_series(r, period)
        assert abs(exact - truncated_residue_series(r, period, 60)) < Fraction(1, 2**55)
        assert abs(residue_series(r, period, exact=False) - float(exact)) < 1e-15


def test_z4_support_shape(z4):
    support = build_nu_support(z4)
    assert len(support) == 16
    assert support.periods == (4, 4, 4, 4)


def test_z4_weights_against_truncated_oracle(z4):
    support = build_nu_support(z4)
    oracle = brute_nu(z4)
    assert set(oracle) == set(support.points)
    for atom in support:
        assert abs(atom.nu_weight - oracle[atom.point]) < Fraction(1, 2**55)
    assert support.weight((0, 0)) == Fraction(17, 180)
    assert support.weight((1, 2)) == Fraction(1, 18)
    assert support.weight((2, 0)) == Fraction(2, 45)
    assert support.total() == 1


def test_single_atom_identity():
    sys = System.finite([[0]])
    support = build_nu_support(sys)
    assert support.points == ((0,),)
    assert support.weights == (1,)


def test_float_weights_sum_within_tolerance():
    sys = System.finite([[1, 0, 2], [0, 1, 2]], weights=[0.3, 0.3, 0.4])
    support = build_nu_support(sys)
    assert abs(support.total() - 1.0) <= 1e-12
    oracle = brute_nu(System.finite([[1, 0, 2], [0, 1, 2]], weights=[Fraction(3, 10), Fraction(3, 10), Fraction(2, 5)]))
    for z, w in zip(support.points, support.weights):
        assert abs(w - float(oracle[z])) < 1e-12


def test_support_progressions_record_shifts(z4):
    support = build_nu_support(z4)
    atom = support[support.index[(2, 0)]]
    # (2, 0) = Phi^2(0, 0) = Phi^{-2}(0, 0) and is reached from the other diagonal atoms too
    assert any(p.base == 0 and p.residue == 2 and p.period == 4 for p in atom.contributing_shifts)


def test_sample_shift_law():
    batch = sample_nu(System.finite([[1, 2, 3, 0], [2, 3, 0, 1]]), 11, 10**6)
    freq = (batch.shifts == 0).mean()
    sigma = math.sqrt((1 / 3) * (2 / 3) / 10**6)
    assert abs(freq - 1 / 3) <= 3 * sigma
    freq1 = (batch.shifts == 1).mean()
    assert abs(freq1 - 1 / 6) <= 3 * math.sqrt((1 / 6) * (5 / 6) / 10**6)


def test_sample_points_are_diagonal_translates(z4):
    from diagorbit.systems import apply_product

    batch = sample_nu(z4, 5, 200)
    for s in batch:
        assert s.point == apply_product(z4, z4.diagonal(s.base), s.shift)


def test_sample_mean_matches_exact_integral(z4):
    support = build_nu_support(z4)
    G = np.array([math.sin(i) for i in range(len(support))])
    exact = float(sum(g * float(w) for g, w in zip(G, support.weights)))
    count = 200_000
    batch = sample_nu(z4, 7, count)
    idx = np.array([support.index[tuple(p)] for p in batch.points.tolist()])
    vals = G[idx]
    assert abs(vals.mean() - exact) <= 3 * vals.std() / math.sqrt(count)


def test_sampling_is_deterministic(z4):
    a, b = sample_nu(z4, 42, 1000), sample_nu(z4, 42, 1000)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.shifts, b.shifts)
    c = sample_nu(System.rotations([0.2, 0.7]), 1, 100)
    d = sample_nu(System.rotations([0.2, 0.7]), 1, 100)
    assert np.array_equal(c.points, d.points)


def test_sample_count_validation(z4):
    with pytest.raises(ParameterError):
        sample_nu(z4, 0, 0)


@pytest.mark.parametrize("p", [1, 2, 3.5, math.inf])
def test_lp_norm_of_constant(z4, p):
    support = build_nu_support(z4)
    value = lp_norm_nu(z4, np.full(len(support), -3, dtype=np.int64), p)
    assert value == pytest.approx(3, abs=1e-12)
    assert lp_norm_nu(z4, np.zeros(len(support), dtype=np.int64), p) == 0


def test_lp_norm_of_indicator(z4):
    support = build_nu_support(z4)
    assert lp_norm_nu(z4, support.indicator([(0, 0)]), 1) == Fraction(17, 180)
    assert lp_norm_nu(z4, {(0, 0): 1}, 1) == Fraction(17, 180)
    assert lp_norm_nu(z4, lambda z: int(z == (0, 0)), math.inf) == 1


def test_lp_norm_rejects_small_p(z4):
    with pytest.raises(ParameterError):
        lp_norm_nu(z4, lambda z: 1, 0.5)


def test_lp_norm_circle_estimate():
    sys = System.rotations([GOLDEN])
    est = lp_norm_nu(sys, lambda pts: np.ones(len(pts)), 2, seed=0, count=1000)
    assert isinstance(est, NormEstimate)
    assert est.value == pytest.approx(1.0) and est.stderr == pytest.approx(0.0)
    # ||cos 2 pi x||_2 = 1/sqrt(2) since nu projects to Lebesgue on each coordinate
    est = lp_norm_nu(sys, lambda pts: np.cos(2 * np.pi * pts[:, 0]), 2, seed=1, count=100_000)
    assert abs(est.value - 1 / math.sqrt(2)) <= 4 * est.stderr
    sup = lp_norm_nu(sys, lambda pts: np.cos(2 * np.pi * pts[:, 0]), math.inf, seed=1, count=1000)
    assert sup.lower_bound and sup.value <= 1.0


def test_nonsingularity_trivial_sets(z4):
    support = build_nu_support(z4)
    full = np.ones(len(support), dtype=bool)
    assert nu_measure(support, full) == 1
    assert nu_measure(support, preimage(support, full)) == 1
    empty = np.zeros(len(support), dtype=bool)
    assert nu_measure(support, preimage(support, empty)) == 0


def test_nonsingularity_single_point(z4):
    support = build_nu_support(z4)
    A = [(0, 0)]
    pre = preimage(support, A)
    assert [support.points[i] for i in np.flatnonzero(pre)] == [(3, 2)]
    a, b = nu_measure(support, A), nu_measure(support, pre)
    assert (a, b) == (Fraction(17, 180), Fraction(1, 18))
    assert a / 3 <= b <= 2 * a
    assert nu_preimage_by_shift(support, A) == b


def test_check_nonsingularity_report(z4):
    report = check_nonsingularity(z4, 100, seed=3)
    assert report.ok
    assert Fraction(1, 3) <= report.min_ratio <= 1 <= report.max_ratio <= 2


@pytest.mark.parametrize("sys", random_systems(6, seed=5), ids=lambda s: f"m{s.space.size}H{s.H}")
def test_pushforward_two_ways(sys):
    support = build_nu_support(sys)
    rng = np.random.default_rng(0)
    for _ in range(20):
        mask = rng.random(len(support)) < 0.5
        assert nu_measure(support, preimage(support, mask)) == nu_preimage_by_shift(support, mask)


def test_float_nonsingularity():
    sys = System.finite([[1, 0, 2], [0, 1, 2]], weights=[0.3, 0.3, 0.4])
    assert check_nonsingularity(sys, 50, seed=1).ok


def test_lemma_one_pullback(z4):
    support = build_nu_support(z4)
    rng = np.random.default_rng(9)
    seq = random_sequence(support, rng)
    div = divergence_set(seq, 10)
    div_composed = divergence_set(compose_sequence(support, seq), 10)
    assert np.array_equal(div_composed, preimage(support, div))


def test_mu_delta_counterexample(z4):
    image, source = mu_delta_pullback_counterexample(z4)
    # (1, 2) is off the diagonal, yet its preimage (0, 0) carries mu_Delta mass 1/4
    assert image == (1, 2) and source == (0, 0)
    assert mu_delta_pullback_counterexample(System.finite([[1, 0], [1, 0]])) is None

from fractions import Fraction

import numpy as np
import pytest

from diagorbit.planted import random_finite_system
from diagorbit.systems import FiniteMap, FiniteSpace, System, apply_product


@pytest.fixture
def z4():
    """Z_4 with T_1 = +1 and T_2 = +2, uniform weights."""
    return System(FiniteSpace.uniform(4), (FiniteMap.shift(4, 1), FiniteMap.shift(4, 2)))


def brute_nu(sys, cutoff=60):
    """nu by direct summation over |n| <= cutoff, pushing every diagonal atom forward."""
    out = {}
    for x, w in enumerate(sys.space.weights):
        if w == 0:
            continue
        for n in range(-cutoff, cutoff + 1):
            z = apply_product(sys, sys.diagonal(x), n)
            out[z] = out.get(z, Fraction(0)) + Fraction(1, 3 * 2 ** abs(n)) * w
    return out


def random_systems(count, seed=2024, max_m=8, max_H=3):
    rng = np.random.default_rng(seed)
    systems = []
    for k in range(count):
        m = int(rng.integers(1, max_m + 1))
        H = int(rng.integers(1, max_H + 1))
        systems.append(random_finite_system(rng, m, H, uniform=bool(k % 2)))
    return systems


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")

from itertools import product

import numpy as np
import pytest

from relupeak.linprog import GE, LE, LinearProgram, LpStatus, solve_lp_fixed
from relupeak.mipsolver import (
    MipStatus,
    MixedIntegerProgram,
    enumerate_binary_oracle,
    solve_mip,
)
from tools import assert_lp_feasible

INF = np.inf


def knapsack_mip():
    # max 5z1 + 4z2 + 3z3 + 2z4  s.t.  4z1 + 3z2 + 2z3 + z4 <= 6
    base = LinearProgram(
        np.array([5.0, 4.0, 3.0, 2.0]),
        np.zeros(4),
        np.ones(4),
        rows=[([4.0, 3.0, 2.0, 1.0], LE, 6.0)],
    )
    return MixedIntegerProgram(base, (0, 1, 2, 3))


def brute_force_knapsack():
    best = -np.inf
    for bits in product((0, 1), repeat=4):
        if 4 * bits[0] + 3 * bits[1] + 2 * bits[2] + bits[3] <= 6:
            best = max(best, 5 * bits[0] + 4 * bits[1] + 3 * bits[2] + 2 * bits[3])
    return best


def test_simple_packing():
    base = LinearProgram(
        np.array([1.0, 1.0]),
        np.zeros(2),
        np.ones(2),
        rows=[([1.0, 1.0], LE, 1.0)],
    )
    mip = MixedIntegerProgram(base, (0, 1))
    out = solve_mip(mip)
    assert out.status == MipStatus.OPTIMAL
    assert out.incumbent_value == pytest.approx(1.0, abs=1e-9)


def test_integral_relaxation_solved_at_root():
    # Box-constrained with integral LP optimum: one node suffices.
    base = LinearProgram(np.array([2.0, 3.0]), np.zeros(2), np.ones(2))
    mip = MixedIntegerProgram(base, (0, 1))
    out = solve_mip(mip)
    assert out.status == MipStatus.OPTIMAL
    assert out.incumbent_value == pytest.approx(5.0, abs=1e-9)
    assert out.nodes == 1


def test_knapsack_matches_bruteforce():
    assert brute_force_knapsack() == 9  # freeze the hand-checked oracle value
    out = solve_mip(knapsack_mip())
    assert out.status == MipStatus.OPTIMAL
    assert out.incumbent_value == pytest.approx(9.0, abs=1e-9)
    assert_lp_feasible(knapsack_mip().base, out.incumbent)
    assert np.all(np.abs(out.incumbent - np.round(out.incumbent)) <= 1e-6)


def test_oracle_on_knapsack_and_edge_cases():
    oracle = enumerate_binary_oracle(knapsack_mip())
    assert oracle.status == MipStatus.OPTIMAL
    assert oracle.incumbent_value == pytest.approx(9.0, abs=1e-9)

    # Infeasible for every assignment.
    base = LinearProgram(
        np.array([1.0]), np.zeros(1), np.ones(1), rows=[([1.0], GE, 2.0)]
    )
    assert enumerate_binary_oracle(MixedIntegerProgram(base, (0,))).status == (
        MipStatus.INFEASIBLE
    )

    # Zero binaries: plain LP.
    base = LinearProgram(np.array([1.0]), np.zeros(1), np.array([0.75]))
    out = enumerate_binary_oracle(MixedIntegerProgram(base, ()))
    assert out.incumbent_value == pytest.approx(0.75, abs=1e-12)

    with pytest.raises(ValueError):
        enumerate_binary_oracle(
            MixedIntegerProgram(
                LinearProgram(np.ones(21), np.zeros(21), np.ones(21)), range(21)
            )
        )


def test_binary_bounds_validated():
    base = LinearProgram(np.array([1.0]), np.zeros(1), np.array([2.0]))
    with pytest.raises(ValueError):
        MixedIntegerProgram(base, (0,))


def _random_mip(rng):
    n_bin = int(rng.integers(1, 11))
    n_cont = int(rng.integers(0, 4))
    n = n_bin + n_cont
    obj = rng.normal(size=n) * 3.0
    lo = np.concatenate([np.zeros(n_bin), rng.uniform(-2.0, 0.0, size=n_cont)])
    hi = np.concatenate([np.ones(n_bin), lo[n_bin:] + rng.uniform(0.5, 3.0, n_cont)])
    rows = []
    for _ in range(int(rng.integers(1, 16))):
        a = rng.normal(size=n)
        sense = (LE, GE)[int(rng.integers(0, 2))]
        rhs = float(a @ rng.uniform(lo, hi) + rng.normal() * 0.3)
        rows.append((a, sense, rhs))
    return MixedIntegerProgram(LinearProgram(obj, lo, hi, rows), tuple(range(n_bin)))


def test_random_mips_match_enumeration_oracle():
    rng = np.random.default_rng(7_2024)
    solved = 0
    for _ in range(100):
        mip = _random_mip(rng)
        bb = solve_mip(mip)
        oracle = enumerate_binary_oracle(mip)
        assert bb.status == oracle.status
        if oracle.status == MipStatus.OPTIMAL:
            assert bb.incumbent_value == pytest.approx(
                oracle.incumbent_value, abs=1e-6
            )
            assert_lp_feasible(mip.base, bb.incumbent)
            solved += 1
    assert solved >= 40  # the generator must produce plenty of feasible MIPs


def test_bound_monotone_nonincreasing():
    rng = np.random.default_rng(99)
    for _ in range(10):
        mip = _random_mip(rng)
        bounds = []
        solve_mip(mip, on_node=lambda n, bound, inc: bounds.append(bound))
        finite = [b for b in bounds if np.isfinite(b)]
        assert all(b1 >= b2 - 1e-9 for b1, b2 in zip(finite, finite[1:]))


def test_warm_start_dominance_and_validation():
    mip = knapsack_mip()
    warm = np.array([1.0, 0.0, 1.0, 0.0])  # feasible, value 8
    out = solve_mip(mip, warm_start=warm)
    assert out.incumbent_value >= 8.0 - 1e-12
    assert out.incumbent_value == pytest.approx(9.0, abs=1e-9)

    # Infeasible warm start is rejected with a warning; solve still succeeds.
    bad = np.array([1.0, 1.0, 1.0, 1.0])  # weight 10 > 6
    with pytest.warns(UserWarning, match="warm start rejected"):
        out = solve_mip(mip, warm_start=bad)
    assert out.incumbent_value == pytest.approx(9.0, abs=1e-9)

    # Fractional warm start is also rejected.
    with pytest.warns(UserWarning, match="not integral"):
        solve_mip(mip, warm_start=np.array([0.5, 0.0, 0.0, 0.0]))


def test_time_limit_keeps_warm_incumbent():
    mip = knapsack_mip()
    warm = np.array([1.0, 0.0, 1.0, 0.0])
    out = solve_mip(mip, warm_start=warm, time_limit=0.0)
    assert out.status in (MipStatus.FEASIBLE, MipStatus.OPTIMAL)
    assert out.incumbent_value >= 8.0 - 1e-12
    assert out.best_bound >= out.incumbent_value - 1e-6


def test_deterministic_without_time_limit():
    rng = np.random.default_rng(4321)
    mip = _random_mip(rng)
    a = solve_mip(mip)
    b = solve_mip(mip)
    assert a.incumbent_value == b.incumbent_value
    assert a.nodes == b.nodes
    if a.incumbent is not None:
        assert np.array_equal(a.incumbent, b.incumbent)


def test_incumbent_binaries_exact_after_clean_resolve():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mip = _random_mip(rng)
        out = solve_mip(mip)
        if out.status == MipStatus.OPTIMAL:
            z = out.incumbent[list(mip.binaries)]
            assert np.all((z == 0.0) | (z == 1.0))

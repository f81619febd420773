import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from manifold_quantiles.diagnostics import swapped_plan_fixture
from manifold_quantiles.geometry import angles_to_points, uniform_sample
from manifold_quantiles.transport import (
    InfeasibleMasses,
    TransportError,
    check_cyclical_monotonicity,
    cost_matrix,
    duality_gap,
    solve_assignment,
    solve_kantorovich,
)


def brute(cost):
    n = cost.shape[0]
    best = min(itertools.permutations(range(n)), key=lambda p: float(np.sum(cost[np.arange(n), list(p)])))
    return float(np.sum(cost[np.arange(n), list(best)])), np.array(best)


def dense_lp(cost, a, b):
    m, n = cost.shape
    eq = np.vstack([np.kron(np.eye(m), np.ones(n)), np.kron(np.ones(m), np.eye(n))])
    res = linprog(cost.ravel(), A_eq=eq, b_eq=np.r_[a, b], bounds=(0, None), method="highs")
    assert res.success
    return res.fun


def test_cost_examples():
    y = uniform_sample("s2", 6, 0)
    assert np.allclose(np.diag(cost_matrix("s2", y, y)), 0.0, atol=1e-15)
    c = cost_matrix("s2", [[1, 0, 0]], [[0, 1, 0]])
    assert c[0, 0] == pytest.approx(math.pi**2 / 8)


def test_cost_on_circle_by_hand():
    ang = np.array([0.0, 1.0, 2.5])
    pts = angles_to_points(ang[:, None])
    by_hand = np.array([[0.0, 1.0, 2.5], [1.0, 0.0, 1.5], [2.5, 1.5, 0.0]])
    assert np.allclose(cost_matrix("s1", pts, pts), by_hand**2 / 2, atol=1e-14)


def test_assignment_trivial_cases():
    plan = solve_assignment(np.array([[3.0]]))
    assert plan.perm.tolist() == [0] and plan.objective == 3.0
    sigma = np.array([2, 0, 3, 1])
    c = np.ones((4, 4))
    c[np.arange(4), sigma] = 0.0
    for method in ("sap", "simplex"):
        plan = solve_assignment(c, method)
        assert np.array_equal(plan.perm, sigma) and plan.objective == 0.0


def test_assignment_rejects_bad_input():
    with pytest.raises(TransportError):
        solve_assignment(np.ones((2, 3)))
    with pytest.raises(TransportError):
        solve_assignment(np.array([[0.0, np.nan], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        solve_assignment(np.eye(2), "greedy")


@settings(max_examples=40)
@given(st.integers(1, 7), st.integers(0, 2**31), st.sampled_from(["sap", "simplex"]))
def test_assignment_equals_brute_force(n, seed, method):
    y, z = uniform_sample("s2", n, seed), uniform_sample("s2", n, seed + 1)
    c = cost_matrix("s2", y, z)
    ref, best = brute(c)
    plan = solve_assignment(c, method)
    assert abs(plan.objective - ref) <= 1e-12
    assert np.array_equal(plan.perm, best)  # continuous costs: the optimum is unique


def test_engines_agree_at_scale():
    rng = np.random.default_rng(3)
    c = cost_matrix("t2", uniform_sample("t2", 400, rng), uniform_sample("t2", 400, rng))
    a, b = solve_assignment(c, "sap"), solve_assignment(c, "simplex")
    assert a.objective == pytest.approx(b.objective, rel=1e-12)
    assert np.array_equal(a.perm, b.perm)


@settings(max_examples=25)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_assignment_row_permutation(n, seed):
    rng = np.random.default_rng(seed)
    c = cost_matrix("s2", uniform_sample("s2", n, rng), uniform_sample("s2", n, rng))
    sigma = rng.permutation(n)
    base, moved = solve_assignment(c), solve_assignment(c[sigma])
    assert moved.objective == pytest.approx(base.objective, abs=1e-12)
    assert np.array_equal(moved.perm, base.perm[sigma])


def test_kantorovich_forced_plan():
    c = cost_matrix("s2", uniform_sample("s2", 7, 0), uniform_sample("s2", 1, 1))
    plan = solve_kantorovich(c, [1.0])
    assert np.allclose(plan.dense()[:, 0], 1 / 7, atol=1e-15)


def test_kantorovich_three_by_two():
    rng = np.random.default_rng(8)
    c = cost_matrix("s2", uniform_sample("s2", 3, rng), uniform_sample("s2", 2, rng))
    plan = solve_kantorovich(c, [0.75, 0.25])
    assert plan.objective == pytest.approx(dense_lp(c, np.full(3, 1 / 3), [0.75, 0.25]), abs=1e-9)


def test_kantorovich_birkhoff():
    rng = np.random.default_rng(9)
    c = cost_matrix("s2", uniform_sample("s2", 30, rng), uniform_sample("s2", 30, rng))
    plan = solve_kantorovich(c, np.full(30, 1 / 30))
    assert plan.objective == pytest.approx(solve_assignment(c).objective / 30, abs=1e-9)


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31), st.booleans())
def test_kantorovich_matches_lp(big_n, n, seed, sparse):
    rng = np.random.default_rng(seed)
    c = cost_matrix("t2", uniform_sample("t2", big_n, rng), uniform_sample("t2", n, rng))
    w = rng.dirichlet(np.ones(n))
    if sparse and n > 1:
        w[0] = 0.0
        w /= w.sum()
    plan = solve_kantorovich(c, w)
    assert plan.objective == pytest.approx(dense_lp(c, np.full(big_n, 1 / big_n), w), abs=1e-9)
    assert np.abs(plan.row_sums() - 1 / big_n).max() < 1e-9
    assert np.abs(plan.col_sums() - w).max() < 1e-9
    assert np.all(plan.mass >= 0)
    assert plan.support_size <= big_n + np.count_nonzero(w) - 1
    assert duality_gap(plan, w) <= 1e-9 * (1 + abs(plan.objective))


@settings(max_examples=20)
@given(st.integers(2, 6), st.integers(2, 5), st.integers(0, 2**31))
def test_kantorovich_column_permutation(big_n, n, seed):
    rng = np.random.default_rng(seed)
    c = cost_matrix("s2", uniform_sample("s2", big_n, rng), uniform_sample("s2", n, rng))
    w = rng.dirichlet(np.ones(n))
    sigma = rng.permutation(n)
    a, b = solve_kantorovich(c, w), solve_kantorovich(c[:, sigma], w[sigma])
    assert a.objective == pytest.approx(b.objective, abs=1e-12)


def test_kantorovich_rejects_bad_masses():
    c = np.ones((3, 2))
    with pytest.raises(InfeasibleMasses):
        solve_kantorovich(c, [0.5, 0.6])
    with pytest.raises(InfeasibleMasses):
        solve_kantorovich(c, [1.5, -0.5])
    with pytest.raises(TransportError):
        solve_kantorovich(c, [1.0])


def test_coupling_json():
    c = cost_matrix("s2", uniform_sample("s2", 3, 0), uniform_sample("s2", 2, 1))
    doc = solve_kantorovich(c, [0.5, 0.5]).to_json()
    assert doc["shape"] == [3, 2]
    assert sum(t[2] for t in doc["triples"]) == pytest.approx(1.0)


def test_monotonicity_on_optimal_plan():
    rng = np.random.default_rng(4)
    y, z = uniform_sample("s2", 50, rng), uniform_sample("s2", 50, rng)
    perm = solve_assignment(cost_matrix("s2", y, z)).perm
    rep = check_cyclical_monotonicity("s2", y, z[perm], k_max=4, trials=1000, seed=0)
    assert rep.ok and rep.max_violation <= 1e-9


def test_monotonicity_flags_swapped_pair():
    y, z = swapped_plan_fixture()
    rep = check_cyclical_monotonicity("s2", y, z, trials=10, seed=0)
    assert rep.max_violation == pytest.approx(math.pi**2 / 4) and not rep.ok


def test_monotonicity_single_pair():
    y = uniform_sample("s2", 1, 0)
    assert check_cyclical_monotonicity("s2", y, y).max_violation == 0.0

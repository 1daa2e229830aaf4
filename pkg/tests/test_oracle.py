import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from jointdet import discrete_optimal as do
from jointdet.errors import InfeasibleError, InstanceTooLargeError
from jointdet.instances import random_discrete
from jointdet.oracle import deterministic_frontier, lp_coefficients, lp_optimal, simplex


def test_instance_a_lp(inst_a):
    for method in ("simplex", "dual"):
        sol = lp_optimal(inst_a, 0.7, method)
        assert sol.optimal_c1 == pytest.approx(0.39, abs=1e-12)
        assert sol.binding
    assert lp_optimal(inst_a, 0.7, "dual").multiplier == pytest.approx(0.8)


def test_infeasible_below_alpha_min(inst_b):
    with pytest.raises(InfeasibleError):
        lp_optimal(inst_b, 0.2)


def test_simplex_small_program():
    # min -x - y  s.t. x + 2y <= 4, x = 1
    x, v = simplex([-1, -1], [[1, 2]], [4], [[1, 0]], [1])
    assert v == pytest.approx(-2.5) and np.allclose(x, [1, 1.5])


@given(st.integers(0, 10_000), st.floats(0.05, 0.9))
def test_simplex_matches_scipy(seed, u):
    p = random_discrete(np.random.default_rng(seed))
    a, b, _ = lp_coefficients(p)
    low = b.min(axis=1).sum()
    alpha = low + u * (1 - low)
    M, K = a.shape
    A_eq = np.kron(np.eye(M), np.ones(K))
    ref = linprog(a.ravel(), A_ub=b.ravel()[None, :], b_ub=[alpha], A_eq=A_eq, b_eq=np.ones(M),
                  bounds=(0, None), method="highs")
    assert lp_optimal(p, alpha).optimal_c1 == pytest.approx(ref.fun, abs=1e-9)
    assert lp_optimal(p, alpha, "dual").optimal_c1 == pytest.approx(ref.fun, abs=1e-9)


def test_frontier_hull_contains_lp(inst_a):
    fr = deterministic_frontier(inst_a)
    assert fr.value(0.7) == pytest.approx(0.39, abs=1e-12)
    assert len(fr.points) == 9  # three choices at each of two points


def test_frontier_guard():
    p = random_discrete(np.random.default_rng(0), M=8, L0=3, L1=3)
    with pytest.raises(InstanceTooLargeError):
        deterministic_frontier(p, limit=1000)


def test_zero_probability_points_warn():
    p = do.DiscreteProblem((0, 1, 2), [[0.5, 0.5, 0.0]], [[0.4, 0.6, 0.0]], [1.0], [1.0])
    with pytest.warns(RuntimeWarning, match="zero-probability"):
        sol = lp_optimal(p, 0.5)
    assert np.allclose(sol.rule_weights.sum(axis=1), 1.0)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointdet import discrete_optimal as do
from jointdet.calibrate import (AtomicEvaluator, EmpiricalEvaluator, cost_curve,
                                monotonicity_violations, monte_carlo_evaluator, solve)
from jointdet.errors import InvalidInputError
from jointdet.instances import random_discrete


def test_cost_curve_instance_a(inst_a):
    curve = cost_curve(do.c0_evaluator(inst_a), [0.7, 0.8, 0.85, 0.9, 1.0])
    assert curve[2] == (0.85, 0.5, 0.5)
    assert curve[0][1:] == (1.0, 1.0)
    assert curve[-1][1:] == (0.0, 0.0)
    assert monotonicity_violations(curve) == []


def test_cost_curve_rejects_bad_grid(inst_a):
    with pytest.raises(InvalidInputError):
        cost_curve(do.c0_evaluator(inst_a), [1.0, 0.5])


def test_cost_curve_reports_failing_lambda():
    def ev(lam, gamma):
        if lam > 1:
            raise ValueError("boom")
        return 0.5

    with pytest.raises(ValueError, match="lambda=2.0"):
        cost_curve(ev, [0.5, 2.0])


def test_extreme_thresholds(inst_b):
    ev = do.c0_evaluator(inst_b)
    assert ev(1e9, 0.0) == pytest.approx(do.alpha_min(inst_b), abs=1e-12)
    # below every statistic value the rule always decides H1
    assert ev(1e-9, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_unreachable_high():
    ev = AtomicEvaluator([1.0, 2.0], [0.2, 0.2], base=0.1)
    assert solve(ev, 0.9).status == "unreachable_high"


def test_target_must_be_inside_unit_interval(inst_a):
    with pytest.raises(InvalidInputError):
        solve(do.c0_evaluator(inst_a), 1.0)


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_discrete_targets_hit_exactly(seed, u):
    p = random_discrete(np.random.default_rng(seed))
    ev = do.c0_evaluator(p)
    target = ev.never_h1 + u * (ev.always_h1 - ev.never_h1)
    if not 0.0 < target < 1.0:
        return
    r = solve(ev, target)
    assert r.status == "exact"
    assert abs(r.achieved_c0 - target) <= 1e-12
    assert 0.0 <= r.gamma <= 1.0
    atoms, _ = ev.atoms()
    if r.gamma > 0:
        assert np.any(np.isclose(atoms, r.lam, rtol=1e-12, atol=0))


def test_empirical_evaluator_ties_and_error():
    ev = EmpiricalEvaluator([1.0, 2.0, 2.0, 3.0])
    mean, se = ev(2.0, 0.5)
    assert mean == pytest.approx((1 + 0.5 * 2) / 4)
    assert se > 0
    assert ev(10.0, 0.0) == (0.0, 0.0)


def _normal_sampler(rng, size):
    return rng.standard_normal(size)


def test_monte_carlo_solve_reproducible_and_within_error():
    ev1 = monte_carlo_evaluator(np.abs, _normal_sampler, 100_000, seed=9)
    ev2 = monte_carlo_evaluator(np.abs, _normal_sampler, 100_000, seed=9)
    r1, r2 = solve(ev1, 0.05), solve(ev2, 0.05)
    assert r1 == r2
    assert r1.status == "monte_carlo"
    assert abs(r1.achieved_c0 - 0.05) <= 3 * r1.standard_error
    # |Z| > 1.959964 has probability 0.05
    assert r1.lam == pytest.approx(1.959964, abs=0.03)


def test_monte_carlo_chunking_is_deterministic():
    a = monte_carlo_evaluator(np.abs, _normal_sampler, 70_000, seed=1, chunk=1 << 16)
    b = monte_carlo_evaluator(np.abs, _normal_sampler, 70_000, seed=1, chunk=1 << 16)
    assert np.array_equal(a.sorted, b.sorted)


def test_non_monotone_evaluator_is_reported():
    def ev(lam, gamma):
        return 0.5 + 0.4 * math.sin(math.log(lam))

    with pytest.warns(RuntimeWarning, match="increased"):
        r = solve(ev, 0.5)
    assert r.notes

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointdet import discrete_optimal as do
from jointdet import general_optimal as go
from jointdet.errors import InvalidInputError, NumericalDomainError, PreconditionViolation
from jointdet.families import gaussian_fixed_family
from jointdet.instances import instance_g, random_discrete
from jointdet.model import (CostSpec, DetEstRule, Estimator, HypothesisSpec, Prior, Problem,
                            average_cost, constant_cost, mismatch_cost, squared_error,
                            truth_norm_squared)


def test_inner_minimize_finite():
    sol = go.inner_minimize(lambda U: (U[:, 0] - 2) ** 2, go.Domain(np.array([[1.0], [2.0], [3.0]])))
    assert sol.value == 0 and sol.minimizer[0] == 2


def test_inner_minimize_box_quadratic():
    dom = go.Domain(np.linspace(-1, 1, 11)[:, None], np.array([-1.0]), np.array([1.0]))
    sol = go.inner_minimize(lambda U: (U[:, 0] - 0.3137) ** 2 + 1, dom, tol=1e-8)
    assert abs(sol.minimizer[0] - 0.3137) < 1e-8


def test_inner_minimize_two_dimensional():
    g = np.linspace(-2, 2, 9)
    nodes = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    dom = go.Domain(nodes, np.array([-2.0, -2.0]), np.array([2.0, 2.0]))
    target = np.array([0.41, -1.13])
    sol = go.inner_minimize(lambda U: np.sum((U - target) ** 2, axis=1), dom, tol=1e-9)
    assert np.allclose(sol.minimizer, target, atol=1e-7)


def test_inner_minimize_errors():
    with pytest.raises(InvalidInputError):
        go.inner_minimize(lambda U: U[:, 0], go.Domain(np.zeros((0, 1))))
    with pytest.raises(NumericalDomainError) as exc, np.errstate(invalid="ignore"):
        go.inner_minimize(lambda U: np.log(U[:, 0]), go.Domain(np.array([[1.0], [-1.0]])))
    assert exc.value.point[0] == -1.0


def test_side_objective_mmse_minimizer(inst_g):
    sol = go.side_objective(inst_g, 1, 1.0, 3.0)
    assert abs(sol.minimizer[0] - 0.5) < 1e-6


def test_constant_costs_give_constant_objective(inst_a):
    p = do.to_problem(inst_a)
    one = constant_cost(1.0)
    q = Problem(p.h0, p.h1, CostSpec(one, one, one, one))
    sol = go.side_objective(q, 1, 0, 2.0)
    assert sol.value == pytest.approx(0.5 * 0.9 + 0.5 * 0.2 + 2.0 * 0.5, rel=1e-12)
    assert len(sol.ties) == 2


def test_side_objective_reduces_to_weighted_max(inst_a):
    p = do.to_problem(inst_a)
    for x, lab in enumerate(inst_a.alphabet):
        m1, _ = do.weighted_max_likelihood(inst_a, 1, lab)
        f1 = float(inst_a.weighted(1)[:, x].sum())
        f0 = float(inst_a.weighted(0)[:, x].sum())
        # c11 mismatch, c10 = 1: f1 - max pi f1 + lam f0
        assert go.side_objective(p, 1, x, 0.6).value == pytest.approx(f1 - m1 + 0.6 * f0, abs=1e-12)


@given(st.integers(0, 10_000))
def test_reduction_to_finite_rule(seed):
    p = random_discrete(np.random.default_rng(seed))
    prob = do.to_problem(p)
    stats = do.statistic_values(p)
    for lam in list(stats[np.isfinite(stats)]) + [0.37, 2.9]:
        for x, lab in enumerate(p.alphabet):
            a = do.decide(p, lab, lam, 0.25)
            b = go.optimal_decide(prob, x, lam, 0.25)
            assert a.decision == b.decision


def test_symmetric_problem_always_randomizes():
    h = HypothesisSpec(gaussian_fixed_family(0.0), Prior.simple())
    one = constant_cost(1.0)
    p = Problem(h, h, CostSpec(constant_cost(0.0), one, one, constant_cost(0.0)))
    for x in (-2.0, 0.0, 1.5):
        assert go.optimal_decide(p, x, 1.0, 0.3).randomized
        lhs, rhs = go.decoupled_test_statistic(p, x, 1.0)
        assert lhs == pytest.approx(rhs, rel=1e-14)


def test_alpha_min_general_matches_finite(inst_b):
    assert go.alpha_min_general(do.to_problem(inst_b)) == pytest.approx(0.3, abs=1e-12)


def test_alpha_min_false_alarm_costs_is_zero(inst_g):
    assert go.alpha_min_general(inst_g, samples=2000, seed=0) == 0.0


def test_large_threshold_attains_alpha_min(inst_b):
    p = do.to_problem(inst_b)
    c0 = average_cost(p, go.optimal_rule(p, 1e8, 0.0), 0).value
    assert c0 == pytest.approx(go.alpha_min_general(p), abs=1e-6)


def test_lagrangian_floor_bounds_random_rules(rng):
    for _ in range(20):
        p = do.to_problem(random_discrete(rng))
        lam = float(rng.uniform(0.1, 5))
        floor = go.lagrangian_floor(p, lam)
        M, L0, L1 = len(p.alphabet), p.h0.prior.size, p.h1.prior.size
        for _ in range(5):
            d = rng.random(M)
            e0 = rng.integers(0, L0, M).astype(float)
            e1 = rng.integers(0, L1, M).astype(float)
            rule = DetEstRule(lambda pts, d=d: d[pts[:, 0].astype(int)],
                              Estimator(lambda pts, e=e0: e[pts[:, 0].astype(int)]),
                              Estimator(lambda pts, e=e1: e[pts[:, 0].astype(int)]))
            total = average_cost(p, rule, 1).value + lam * average_cost(p, rule, 0).value
            assert total >= floor - 1e-12


def test_cost_scaling_invariance(inst_a):
    p = do.to_problem(inst_a)
    s = 3.7
    scaled = Problem(p.h0, p.h1, CostSpec(*[(lambda c: (lambda U, t: s * c(U, t)))(c)
                                            for c in (p.costs.c00, p.costs.c01,
                                                      p.costs.c10, p.costs.c11)]))
    for x in (0, 1):
        a, b = go.optimal_decide(p, x, 0.85, 0.5), go.optimal_decide(scaled, x, 0.85, 0.5)
        assert a.decision == b.decision
        assert np.allclose(np.array(b.objectives), s * np.array(a.objectives), rtol=1e-12)


def test_decoupled_matches_optimal_decide(rng):
    for _ in range(30):
        p = do.to_problem(random_discrete(rng))
        lam = float(rng.uniform(0.2, 3))
        for x in range(len(p.alphabet)):
            lhs, rhs = go.decoupled_test_statistic(p, x, lam)
            v = go.optimal_decide(p, x, lam, 0.5)
            expected = 1 if lhs > rhs * (1 + 1e-10) else (0 if lhs < rhs * (1 - 1e-10) else None)
            assert v.decision == expected


def test_decoupled_instance_a_is_weighted_max(inst_a):
    lhs, rhs = go.decoupled_test_statistic(do.to_problem(inst_a), 0, 0.8)
    assert lhs == pytest.approx(0.45, abs=1e-15)
    assert rhs == pytest.approx(0.8 * 0.5, abs=1e-15)


def test_decoupling_violation_detected(inst_b):
    p = do.to_problem(inst_b)
    bad = Problem(p.h0, p.h1, CostSpec(mismatch_cost, mismatch_cost, constant_cost(1.0),
                                       mismatch_cost))
    with pytest.raises(PreconditionViolation, match="c01"):
        go.decoupled_test_statistic(bad, 0, 1.0)


def test_decoupled_estimators_free_of_threshold(inst_g):
    a = go.side_objective(inst_g, 1, 0.7, 0.1).minimizer
    b = go.side_objective(inst_g, 1, 0.7, 10.0).minimizer
    assert np.allclose(a, b, atol=1e-7)
    assert np.allclose(go.decoupled_estimators(inst_g, 0.7)[1], a, atol=1e-7)


def test_false_alarm_statistic_instance_g(inst_g):
    assert go.false_alarm_statistic(inst_g, 1.0) == pytest.approx(0.227, abs=5e-4)
    assert go.false_alarm_statistic(inst_g, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_false_alarm_statistic_degenerate_costs(inst_g):
    one = constant_cost(1.0)
    p = Problem(inst_g.h0, inst_g.h1, CostSpec.false_alarm(one, one))
    assert go.false_alarm_statistic(p, 0.4) == pytest.approx(0.0, abs=1e-15)


def test_false_alarm_statistic_needs_simple_h0(inst_b):
    with pytest.raises(PreconditionViolation):
        go.false_alarm_statistic(do.to_problem(inst_b), 0)


def test_small_threshold_decides_h1_when_estimation_helps(inst_g):
    v = go.optimal_decide(inst_g, 1.0, 1e-9, 0.5)
    assert v.decision == 1


def test_decoupled_evaluator_matches_finite(inst_a):
    from jointdet.calibrate import solve
    r = solve(go.decoupled_evaluator(do.to_problem(inst_a)), 0.7)
    assert r.lam == pytest.approx(0.8) and r.gamma == pytest.approx(0.4)

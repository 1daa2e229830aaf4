import numpy as np
import pytest
from hypothesis import given, strategies as st

from jointdet.discrete_optimal import error_probabilities, optimal_rule, to_problem
from jointdet.errors import InvalidInputError
from jointdet.families import discrete_table_family, gaussian_fixed_family, gaussian_mean_family
from jointdet.instances import instance_g, random_discrete
from jointdet.model import (CostSpec, DetEstRule, Estimator, HypothesisSpec, Prior, Problem,
                            average_cost, likelihood_matrix, marginal_density, script_d,
                            squared_error, truth_norm_squared)


def test_prior_weights_must_sum_to_one():
    with pytest.raises(InvalidInputError, match="sum"):
        Prior.point_masses([0.0, 1.0], [0.5, 0.4])


def test_prior_rejects_nonpositive_weight():
    with pytest.raises(InvalidInputError):
        Prior.point_masses([0.0, 1.0], [1.0, 0.0])


def test_point_masses_must_be_distinct():
    with pytest.raises(InvalidInputError, match="distinct"):
        Prior.point_masses([1.0, 1.0])


def test_simple_prior_shape():
    p = Prior.simple()
    assert p.is_simple and p.param_dim == 0 and p.nodes.shape == (1, 0)


def test_hypothesis_dimension_mismatch():
    with pytest.raises(InvalidInputError, match="dimension"):
        HypothesisSpec(gaussian_mean_family(1), Prior.simple())


def test_table_family_reports_negative_entry():
    with pytest.raises(InvalidInputError, match=r"row 1, column 0"):
        discrete_table_family([[0.5, 0.5], [-0.1, 1.1]])


def test_point_outside_alphabet(inst_a):
    p = to_problem(inst_a)
    with pytest.raises(InvalidInputError, match="alphabet"):
        script_d(p.h1, p.costs.c11, [0.0], 5.0)


def test_script_d_constant_cost_is_marginal():
    h = HypothesisSpec(gaussian_mean_family(1), Prior.gaussian_grid(0, 1, -8, 8, 201))
    one = CostSpec.zero_one().c01
    assert script_d(h, one, [0.3], 1.2) == pytest.approx(marginal_density(h, 1.2), rel=1e-14)


def test_gaussian_marginal_matches_closed_form():
    h = HypothesisSpec(gaussian_mean_family(1), Prior.gaussian_grid(0, 1, -8, 8, 401))
    x = 1.0
    exact = np.exp(-x * x / 4) / np.sqrt(4 * np.pi)
    assert marginal_density(h, x) == pytest.approx(exact, rel=1e-10)


def test_batch_and_single_agree():
    h = HypothesisSpec(gaussian_fixed_family(0.0), Prior.simple())
    xs = np.array([0.0, 0.5, 2.0])
    batch = marginal_density(h, xs)
    assert np.allclose(batch, [marginal_density(h, x) for x in xs], rtol=0, atol=0)


def test_vector_likelihood_matrix_matches_loop():
    fam = gaussian_mean_family(2, sd=0.7)
    h = HypothesisSpec(fam, Prior.point_masses([[0.0, 0.0], [1.0, -2.0], [0.5, 0.5]]))
    pts = np.array([[0.3, 1.0], [2.0, 2.0]])
    loop = np.stack([fam.density(pts, t) for t in h.prior.nodes], axis=1)
    assert np.allclose(likelihood_matrix(h, pts), loop, rtol=1e-14)


@given(st.integers(0, 10_000))
def test_average_cost_matches_error_probabilities(seed):
    p = random_discrete(np.random.default_rng(seed))
    lam, gamma = 0.7, 0.35
    prob = to_problem(p)
    rule = optimal_rule(p, lam, gamma)
    c0, c1 = error_probabilities(p, lam, gamma)
    assert average_cost(prob, rule, 0).value == pytest.approx(c0, abs=1e-12)
    assert average_cost(prob, rule, 1).value == pytest.approx(c1, abs=1e-12)


def test_randomized_estimator_weights_validated():
    est = Estimator(lambda pts: (np.zeros((len(pts), 2, 1)), np.full((len(pts), 2), 0.6)),
                    randomized=True)
    with pytest.raises(InvalidInputError):
        est.support(np.zeros((3, 1)))


def test_delta_outside_unit_interval_rejected(inst_a):
    p = to_problem(inst_a)
    rule = DetEstRule(lambda pts: np.full(len(pts), 1.5), Estimator.constant([0.0]),
                      Estimator.constant([0.0]))
    with pytest.raises(InvalidInputError):
        average_cost(p, rule, 0)


def test_monte_carlo_cost_is_reproducible_and_close():
    g = instance_g()
    rule = DetEstRule(lambda pts: (np.abs(pts[:, 0]) > 1.96).astype(float),
                      Estimator.constant(np.zeros(0)), Estimator(lambda pts: pts / 2))
    a = average_cost(g, rule, 0, samples=200_000, seed=5)
    b = average_cost(g, rule, 0, samples=200_000, seed=5)
    assert a == b
    assert abs(a.value - 0.05) < 4 * a.standard_error


def test_monte_carlo_needs_samples_and_seed():
    g = instance_g()
    rule = DetEstRule(lambda pts: np.zeros(len(pts)), Estimator.constant(np.zeros(0)),
                      Estimator(lambda pts: pts))
    with pytest.raises(InvalidInputError):
        average_cost(g, rule, 0)

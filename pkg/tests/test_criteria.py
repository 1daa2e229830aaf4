import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize, stats

from jointdet import criteria as cr
from jointdet import discrete_optimal as do
from jointdet.errors import InvalidInputError, UndefinedEstimatorError
from jointdet.families import gaussian_fixed_family, gaussian_mean_family
from jointdet.instances import instance_g, random_discrete
from jointdet.model import (CostSpec, HypothesisSpec, Prior, Problem, absolute_error, script_d,
                            squared_error, truth_abs, truth_norm_squared)


def gaussian_h(mean=0.0, sd=1.0, lower=-8.0, upper=8.0, n=201):
    return HypothesisSpec(gaussian_mean_family(1), Prior.gaussian_grid(mean, sd, lower, upper, n))


def exponential_h(rate=1.0, upper=10.0, n=201):
    nodes = np.linspace(0, upper, n)
    w = np.exp(-rate * nodes)
    norm = (1 - math.exp(-rate * upper)) / rate

    def density(t):
        t = np.asarray(t, dtype=float).reshape(-1)
        return np.where((t >= 0) & (t <= upper), np.exp(-rate * t) / norm, 0.0)

    return HypothesisSpec(gaussian_mean_family(1),
                          Prior.quadrature(nodes, w / w.sum(), density, [0.0], [upper]))


def quad_posterior(h, x):
    """Independent oracle: unnormalized posterior density and its support."""
    lo, hi = float(h.prior.lower[0]), float(h.prior.upper[0])

    def g(t):
        return stats.norm.pdf(x, loc=t) * float(h.prior.pdf(np.array([t]))[0])

    return g, lo, hi


def quad_median(h, x):
    g, lo, hi = quad_posterior(h, x)
    total = integrate.quad(g, lo, hi, limit=200, epsabs=0, epsrel=1e-13)[0]
    return optimize.brentq(
        lambda y: integrate.quad(g, lo, y, limit=200, epsabs=0, epsrel=1e-13)[0] - total / 2,
        lo, hi, xtol=1e-14)


# MMSE ---------------------------------------------------------------------


def test_mmse_fixtures(inst_g):
    assert abs(cr.mmse_estimator(inst_g.h1, 0.0)[0]) < 1e-12
    assert cr.mmse_estimator(inst_g.h1, 1.0)[0] == pytest.approx(0.5, abs=1e-6)


def test_mmse_symmetric_point_masses():
    h = HypothesisSpec(gaussian_mean_family(1), Prior.point_masses([-1.0, 1.0]))
    assert cr.mmse_estimator(h, 0.0)[0] == 0.0


def test_mmse_zero_marginal():
    h = HypothesisSpec(gaussian_mean_family(1, sd=0.01), Prior.point_masses([-1.0, 1.0]))
    with pytest.raises(UndefinedEstimatorError):
        cr.mmse_estimator(h, 500.0)


def test_mmse_batch_shape(inst_g):
    est = cr.mmse_estimator(inst_g.h1, np.array([0.0, 1.0, 2.0]))
    assert est.shape == (3, 1) and np.allclose(est[:, 0], [0, 0.5, 1], atol=1e-6)


@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(0.5, 2), st.integers(0, 1000))
def test_mmse_minimizes_squared_risk(x, m, s, seed):
    h = gaussian_h(m, s, m - 8 * s, m + 8 * s)
    est = cr.mmse_estimator(h, x)
    best = script_d(h, squared_error, est, x)
    probes = np.random.default_rng(seed).uniform(m - 4, m + 4, size=(64, 1))
    assert all(best <= script_d(h, squared_error, u, x) + 1e-15 for u in probes)


def test_mmse_statistic_instance_g(inst_g):
    a1, a0 = cr.mmse_statistic(inst_g, 1.0)
    expected = 0.25 * stats.norm.pdf(1, scale=math.sqrt(2)) / stats.norm.pdf(1)
    assert a1 / a0 == pytest.approx(expected, rel=1e-6)
    assert expected == pytest.approx(0.227, abs=5e-4)
    assert cr.mmse_statistic(inst_g, 0.0)[0] == pytest.approx(0.0, abs=1e-15)


def composite_mmse_problem(rng):
    h0 = gaussian_h(rng.uniform(-1, 1), rng.uniform(0.5, 1.5))
    h1 = gaussian_h(rng.uniform(-2, 2), rng.uniform(0.5, 2.0), -12, 12, 241)
    return Problem(h0, h1, CostSpec(squared_error, truth_norm_squared, truth_norm_squared,
                                    squared_error))


def test_mmse_simplified_identity():
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = composite_mmse_problem(rng)
        x = rng.uniform(-2, 2)
        a1, a0 = cr.mmse_statistic(p, x)
        e1 = cr.mmse_estimator(p.h1, x)
        direct1 = script_d(p.h1, truth_norm_squared, e1, x) - script_d(p.h1, squared_error, e1, x)
        assert a1 == pytest.approx(float(direct1), rel=1e-10)
        f0 = float(np.sum(cr.posterior_weights(p.h0, x)[0]))
        e0 = cr.mmse_estimator(p.h0, x)
        assert a0 == pytest.approx(float(e0 @ e0) * f0, rel=1e-10)
        assert abs(a1 / a0 - cr.mmse_simplified_statistic(p, x)) <= 1e-8


def test_mmse_batch_ratio_matches_pointwise(inst_g):
    xs = np.array([-1.5, 0.2, 1.0, 2.5])
    batch = cr.mmse_ratio_batch(inst_g, xs)
    single = [np.divide(*cr.mmse_statistic(inst_g, x)) for x in xs]
    assert np.allclose(batch, single, rtol=1e-12)


# MAP ----------------------------------------------------------------------


def test_map_fixtures(inst_g):
    assert abs(cr.map_estimator(inst_g.h1, 0.0)[0]) < 1e-8
    oracle = optimize.minimize_scalar(
        lambda t: -stats.norm.pdf(1.0, loc=t) * stats.norm.pdf(t), bounds=(-8, 8),
        method="bounded", options={"xatol": 1e-10}).x
    assert cr.map_estimator(inst_g.h1, 1.0)[0] == pytest.approx(oracle, abs=1e-4)


def test_sup_posterior_value(inst_g):
    assert cr.sup_posterior(inst_g.h1, 1.0) == pytest.approx(math.exp(-0.25) / (2 * math.pi),
                                                             rel=1e-12)
    stat, factor = cr.map_statistic(inst_g, 1.0, cr.MapConfig(1e-3, 0, 1))
    assert stat == pytest.approx(math.exp(-0.25) / (2 * math.pi) / stats.norm.pdf(1.0), rel=1e-10)
    assert factor == pytest.approx(1 / 2e-3)


@given(st.integers(0, 10_000))
def test_map_point_masses_match_weighted_max(seed):
    p = random_discrete(np.random.default_rng(seed))
    prob = do.to_problem(p)
    for x, lab in enumerate(p.alphabet):
        _, ties = do.weighted_max_likelihood(p, 1, lab)
        assert cr.map_estimate_set(prob.h1, x) == ties


def test_map_uniform_box_is_classical_glr():
    h0 = HypothesisSpec(gaussian_fixed_family(0.0), Prior.simple())
    h1 = HypothesisSpec(gaussian_mean_family(1), Prior.uniform_grid(-2.0, 3.0, 101))
    p = Problem(h0, h1, CostSpec.false_alarm(squared_error))
    for x in (-1.0, 0.4, 2.2):
        stat, _ = cr.map_statistic(p, x, cr.MapConfig(1e-3, 0, 1))
        glr = stats.norm.pdf(0.0) / stats.norm.pdf(x)  # sup over the box is at theta = x
        assert stat * 5.0 == pytest.approx(glr, rel=1e-9)


def test_map_window_converges_monotonically(inst_g):
    target = cr.map_statistic(inst_g, 1.0, cr.MapConfig(1e-3, 0, 1))[0]
    errs = [abs(cr.map_window_statistic(inst_g, 1.0, 0.1 / 2 ** k) - target) for k in range(4)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-4


def test_map_config_warns_on_wide_window(inst_g):
    with pytest.warns(RuntimeWarning, match="1%"):
        cr.MapConfig.for_problem(inst_g, 1.0)


# median -------------------------------------------------------------------


def test_median_fixtures(inst_g):
    for x in (-1.0, 0.0, 1.0, 2.0):
        assert cr.median_estimator(inst_g.h1, x) == pytest.approx(x / 2, abs=1e-4)


def test_median_point_masses():
    h = HypothesisSpec(gaussian_fixed_family(0.0).__class__(
        lambda pts, t: np.ones(len(pts)), dim=1, param_dim=1), Prior.point_masses([0.0, 1.0], [0.3, 0.7]))
    assert cr.median_estimator(h, 0.0) == 1.0


def test_median_skewed_posterior_matches_quadrature():
    h = exponential_h()
    for x in (0.3, -0.5, 1.7):
        assert cr.median_estimator(h, x) == pytest.approx(quad_median(h, x), abs=1e-6)


def test_median_needs_scalar():
    h = HypothesisSpec(gaussian_mean_family(2), Prior.point_masses([[0.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(InvalidInputError):
        cr.median_estimator(h, [0.0, 0.0])


@given(st.floats(-2, 3), st.integers(0, 1000))
def test_median_minimizes_absolute_risk(x, seed):
    for h in (gaussian_h(0.5, 1.2), exponential_h()):
        med = cr.median_estimator(h, x)
        best = cr.absolute_error_risk(h, med, x)
        probes = np.random.default_rng(seed).uniform(h.prior.lower[0], h.prior.upper[0], 64)
        assert all(best <= cr.absolute_error_risk(h, u, x) + 1e-12 for u in probes)


def test_absolute_risk_matches_quadrature():
    h = exponential_h()
    g, lo, hi = quad_posterior(h, 0.8)
    for u in (0.1, 0.6, 2.0):
        ref = (integrate.quad(lambda t: (u - t) * g(t), lo, u, epsrel=1e-13)[0]
               + integrate.quad(lambda t: (t - u) * g(t), u, hi, epsrel=1e-13)[0])
        assert cr.absolute_error_risk(h, u, 0.8) == pytest.approx(ref, rel=1e-9)


def test_median_numerator_instance_g():
    g = instance_g(CostSpec.false_alarm(absolute_error, truth_abs))
    med = cr.median_estimator(g.h1, 1.0)
    post, lo, hi = quad_posterior(g.h1, 1.0)
    ref = integrate.quad(lambda t: t * post(t), 0.0, med, epsabs=0, epsrel=1e-13)[0]
    assert cr.signed_mass_to(g.h1, 1.0, med) == pytest.approx(ref, abs=1e-8)
    a1, a0 = cr.median_statistic(g, 1.0)
    assert a1 / a0 == pytest.approx(2 * cr.median_simplified_statistic(g, 1.0), rel=1e-9)


def test_median_sgn_identity():
    rng = np.random.default_rng(8)
    for _ in range(5):
        h0 = gaussian_h(rng.uniform(-1, 1), rng.uniform(0.5, 1.5))
        h1 = gaussian_h(rng.uniform(-1, 1), rng.uniform(0.5, 1.5))
        p = Problem(h0, h1, CostSpec(absolute_error, truth_abs, truth_abs, absolute_error))
        x = rng.uniform(-2, 2)
        a1, a0 = cr.median_statistic(p, x)
        med0 = cr.median_estimator(h0, x)
        assert a0 == pytest.approx(2 * cr.signed_mass_to(h0, x, med0), abs=1e-8)
        assert a1 / a0 == pytest.approx(cr.median_simplified_statistic(p, x), rel=1e-7)


def test_median_zero_estimate_on_positive_support():
    h = exponential_h(rate=50.0, upper=1.0)
    assert cr.signed_mass_to(h, 0.0, 0.0) == 0.0


# grid refinement ----------------------------------------------------------


@pytest.mark.parametrize("x", [0.3, 1.0, 2.0])
def test_statistics_stable_under_refinement(x):
    coarse = instance_g(n_nodes=201)
    fine = instance_g(n_nodes=401)
    abs_costs = CostSpec.false_alarm(absolute_error, truth_abs)
    pairs = [
        (cr.mmse_simplified_statistic(coarse, x), cr.mmse_simplified_statistic(fine, x)),
        (cr.map_statistic(coarse, x, cr.MapConfig(1e-3, 0, 1))[0],
         cr.map_statistic(fine, x, cr.MapConfig(1e-3, 0, 1))[0]),
        (cr.median_simplified_statistic(instance_g(abs_costs, 201), x),
         cr.median_simplified_statistic(instance_g(abs_costs, 401), x)),
    ]
    for a, b in pairs:
        assert abs(a - b) < 1e-6

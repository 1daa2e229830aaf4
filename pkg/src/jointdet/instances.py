"""Canonical small instances and random generators used in tests and scripts."""

from __future__ import annotations

import numpy as np

from .discrete_optimal import DiscreteProblem
from .families import gaussian_fixed_family, gaussian_mean_family
from .model import CostSpec, HypothesisSpec, Prior, Problem, squared_error, truth_norm_squared


def instance_a() -> DiscreteProblem:
    """Binary alphabet, simple uniform H0, two H1 subcases with equal priors."""
    return DiscreteProblem(("a", "b"), [[0.5, 0.5]], [[0.9, 0.1], [0.2, 0.8]], [1.0], [0.5, 0.5])


def instance_b() -> DiscreteProblem:
    """Instance A with a composite H0 (alpha_min = 0.3)."""
    return DiscreteProblem(("a", "b"), [[0.5, 0.5], [0.9, 0.1]], [[0.9, 0.1], [0.2, 0.8]],
                           [0.5, 0.5], [0.5, 0.5])


def instance_g(costs: CostSpec = None, n_nodes: int = 201, half_width: float = 8.0) -> Problem:
    """Scalar Gaussian mean: H0 ``X ~ N(0,1)``; H1 ``X|theta ~ N(theta,1)``, ``theta ~ N(0,1)``.

    The H1 prior is a grid of ``n_nodes`` over ``[-half_width, half_width]``.
    Default costs: false-alarm constraint, squared-error estimation with
    ``c01(theta) = theta^2``.
    """
    h0 = HypothesisSpec(gaussian_fixed_family(0.0), Prior.simple())
    h1 = HypothesisSpec(gaussian_mean_family(1),
                        Prior.gaussian_grid(0.0, 1.0, -half_width, half_width, n_nodes))
    if costs is None:
        costs = CostSpec.false_alarm(squared_error, truth_norm_squared)
    return Problem(h0, h1, costs)


def random_discrete(rng: np.random.Generator, M: int = None, L0: int = None,
                    L1: int = None, max_M: int = 8, max_L: int = 3) -> DiscreteProblem:
    """Dirichlet tables and priors with strictly positive entries."""
    M = int(rng.integers(2, max_M + 1)) if M is None else M
    L0 = int(rng.integers(1, max_L + 1)) if L0 is None else L0
    L1 = int(rng.integers(1, max_L + 1)) if L1 is None else L1

    def rows(L):
        t = rng.dirichlet(np.ones(M), size=L)
        return t / t.sum(axis=1, keepdims=True)

    def weights(L):
        w = rng.dirichlet(np.ones(L))
        return w / w.sum()

    return DiscreteProblem(tuple(range(M)), rows(L0), rows(L1), weights(L0), weights(L1))

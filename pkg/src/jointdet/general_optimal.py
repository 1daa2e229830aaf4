"""Optimal detection/estimation under general Bayes costs.

For a threshold ``lam > 0`` each side ``j`` has the objective
``S_j(X) = inf_U [D_j1(U, X) + lam * D_j0(U, X)]``.  The optimal rule decides
H1 when ``S_0 > S_1`` (H0 when ``S_0 < S_1``, randomizes on equality) and
reports the decided side's minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (InvalidInputError, NumericalDomainError, PreconditionViolation,
                     UndefinedStatisticError)
from .model import (CostFn, CostSpec, DetEstRule, Estimator, HypothesisSpec, Prior, Problem,
                    apply_cost, chunk_streams, likelihood_matrix, marginal_density,
                    posterior_weights, sample_hypothesis)

OBJ_RTOL = 1e-10
_GOLD = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class Domain:
    """Search space for an inner minimization.

    A finite candidate set when ``lower``/``upper`` are ``None``; otherwise a
    box whose ``candidates`` form the seed grid.
    """

    candidates: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    @property
    def finite(self) -> bool:
        return self.lower is None


def domain_of(prior: Prior) -> Domain:
    if prior.continuous:
        return Domain(prior.nodes, prior.lower, prior.upper)
    return Domain(prior.nodes)


@dataclass(frozen=True)
class InnerSolution:
    value: float
    minimizer: np.ndarray
    refinement_tol: float
    ties: tuple = ()


def _checked(objective, U):
    vals = np.asarray(objective(U), dtype=float).reshape(len(U))
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        raise NumericalDomainError(f"objective is {vals[k]!r} at U={U[k].tolist()}", U[k])
    return vals


def _grid_step(nodes: np.ndarray, d: int, x: float) -> float:
    u = np.unique(nodes[:, d])
    if len(u) < 2:
        return 0.0
    k = np.searchsorted(u, x)
    gaps = np.diff(u)
    return float(gaps[min(max(k - 1, 0), len(gaps) - 1)] if k in (0, len(u)) else
                 max(gaps[k - 1], gaps[min(k, len(gaps) - 1)]))


def inner_minimize(objective: Callable[[np.ndarray], np.ndarray], domain: Domain,
                   tol: float = 1e-8, max_sweeps: int = 50) -> InnerSolution:
    """Minimize ``objective`` (batched: ``(K, p) -> (K,)``) over ``domain``.

    Finite domains are searched exhaustively and report every candidate tied
    with the minimum.  Boxes start from the best seed node and run cyclic
    golden-section searches per coordinate over the neighbouring grid cells
    until the bracket is narrower than ``tol``.
    """
    cands = np.asarray(domain.candidates, dtype=float)
    if cands.ndim != 2 or len(cands) == 0:
        raise InvalidInputError("empty minimization domain")
    vals = _checked(objective, cands)
    k = int(np.argmin(vals))
    best_val, best = float(vals[k]), cands[k].copy()
    ties = tuple(int(i) for i in np.flatnonzero(vals <= best_val + OBJ_RTOL * abs(best_val)))
    if domain.finite or cands.shape[1] == 0:
        return InnerSolution(best_val, best, tol, ties)

    lower, upper = np.asarray(domain.lower, float), np.asarray(domain.upper, float)
    steps = [_grid_step(cands, d, best[d]) for d in range(cands.shape[1])]
    for _ in range(max_sweeps):
        moved = 0.0
        for d in range(cands.shape[1]):
            if steps[d] == 0.0:
                continue
            a, b = max(best[d] - steps[d], lower[d]), min(best[d] + steps[d], upper[d])

            def f(t):
                U = best.copy()
                U[d] = t
                return float(_checked(objective, U[None, :])[0])

            c, e = b - _GOLD * (b - a), a + _GOLD * (b - a)
            fc, fe = f(c), f(e)
            while b - a > tol:
                if fc <= fe:
                    b, e, fe = e, c, fc
                    c = b - _GOLD * (b - a)
                    fc = f(c)
                else:
                    a, c, fc = c, e, fe
                    e = a + _GOLD * (b - a)
                    fe = f(e)
            t = 0.5 * (a + b)
            ft = f(t)
            if ft < best_val:
                moved = max(moved, abs(t - best[d]))
                best[d], best_val = t, ft
            steps[d] = max(min(steps[d], 4 * abs(moved) + tol), tol)
        if moved < tol:
            break
    return InnerSolution(best_val, best, tol, ties)


# --------------------------------------------------------------------------
# side objectives and the optimal rule
# --------------------------------------------------------------------------


def _weights(p: Problem, X) -> tuple[np.ndarray, np.ndarray]:
    pts, single = p.h0.family.check_points(X)
    if not single:
        raise InvalidInputError("expected a single sample point")
    w0 = likelihood_matrix(p.h0, pts)[0] * p.h0.prior.weights
    w1 = likelihood_matrix(p.h1, pts)[0] * p.h1.prior.weights
    return w0, w1


def _kernel(cost: CostFn, nodes: np.ndarray, w: np.ndarray):
    """``U -> sum_l c(U, theta_l) w_l`` for a batch of estimates."""
    def f(U):
        return apply_cost(cost, U[:, None, :], nodes[None, :, :]) @ w
    return f


def side_objective(p: Problem, side: int, X, lam: float, tol: float = 1e-8,
                   _w=None) -> InnerSolution:
    """``inf_U [D_j1(U, X) + lam D_j0(U, X)]`` for ``j = side``."""
    if lam < 0:
        raise InvalidInputError("lam must be nonnegative")
    w0, w1 = _weights(p, X) if _w is None else _w
    k1 = _kernel(p.costs.get(side, 1), p.h1.prior.nodes, w1)
    k0 = _kernel(p.costs.get(side, 0), p.h0.prior.nodes, w0)
    return inner_minimize(lambda U: k1(U) + lam * k0(U), domain_of(p.hypothesis(side).prior), tol)


@dataclass(frozen=True)
class Verdict:
    """``decision`` is 0, 1 or ``None`` (randomize, H1 with probability ``gamma``)."""

    decision: Optional[int]
    gamma: float
    estimates: dict = field(default_factory=dict)
    objectives: tuple = ()

    @property
    def randomized(self) -> bool:
        return self.decision is None

    @property
    def prob_h1(self) -> float:
        return self.gamma if self.decision is None else float(self.decision)

    @property
    def estimate(self) -> np.ndarray:
        if self.decision is None:
            raise AttributeError("randomized verdict carries one estimate per side")
        return self.estimates[self.decision]


def compare(s0: float, s1: float, rtol: float = OBJ_RTOL) -> int:
    """+1 favours H1 (``s0 > s1``), -1 favours H0, 0 on a tie."""
    if abs(s0 - s1) <= rtol * max(abs(s0), abs(s1)):
        return 0
    return 1 if s0 > s1 else -1


def optimal_decide(p: Problem, X, lam: float, gamma: float, tol: float = 1e-8) -> Verdict:
    if lam <= 0 or not 0.0 <= gamma <= 1.0:
        raise InvalidInputError("need lam > 0 and gamma in [0, 1]")
    w = _weights(p, X)
    s0 = side_objective(p, 0, X, lam, tol, _w=w)
    s1 = side_objective(p, 1, X, lam, tol, _w=w)
    c = compare(s0.value, s1.value)
    objectives = (s0.value, s1.value)
    if c > 0:
        return Verdict(1, gamma, {1: s1.minimizer}, objectives)
    if c < 0:
        return Verdict(0, gamma, {0: s0.minimizer}, objectives)
    return Verdict(None, gamma, {0: s0.minimizer, 1: s1.minimizer}, objectives)


def optimal_rule(p: Problem, lam: float, gamma: float, tol: float = 1e-8) -> DetEstRule:
    """The optimal rule as a :class:`DetEstRule` (evaluated point by point)."""
    def verdicts(pts):
        return [optimal_decide(p, x, lam, gamma, tol) for x in pts]

    def delta1(pts):
        return np.array([v.prob_h1 for v in verdicts(pts)])

    def est(side):
        dim = p.hypothesis(side).prior.param_dim
        def fn(pts):
            out = np.empty((len(pts), dim))
            for k, x in enumerate(pts):
                w = _weights(p, x)
                out[k] = side_objective(p, side, x, lam, tol, _w=w).minimizer
            return out
        return Estimator(fn)

    return DetEstRule(delta1, est(0), est(1))


def lagrangian_floor(p: Problem, lam: float) -> float:
    """``sum_X min(S_0, S_1)``: lower bound on ``C1 + lam C0`` for every rule (finite alphabet)."""
    total = 0.0
    for x in p.alphabet:
        w = _weights(p, x)
        total += min(side_objective(p, 0, x, lam, _w=w).value,
                     side_objective(p, 1, x, lam, _w=w).value)
    return total


# --------------------------------------------------------------------------
# alpha_min bound
# --------------------------------------------------------------------------


def _h0_cost_floor(p: Problem, x) -> float:
    w0, _ = _weights(p, x)
    return min(
        inner_minimize(_kernel(p.costs.get(j, 0), p.h0.prior.nodes, w0),
                       domain_of(p.hypothesis(j).prior)).value
        for j in (0, 1))


def alpha_min_general(p: Problem, samples: int = None, seed: int = None) -> float:
    """``int min(inf_U D_00, inf_U D_10) dX``: no rule has a smaller H0 cost.

    Exact over a finite alphabet.  Otherwise importance-sampled from the H0
    marginal with ``samples`` draws (returns the Monte Carlo mean).
    """
    if p.discrete:
        return float(sum(_h0_cost_floor(p, x) for x in p.alphabet))
    if samples is None or seed is None:
        raise InvalidInputError("continuous problems need a Monte Carlo sample budget and seed")
    total = 0.0
    for rng, size in chunk_streams(seed, samples, chunk=4096):
        _, X = sample_hypothesis(p.h0, rng, size)
        f0 = np.atleast_1d(marginal_density(p.h0, X))
        total += sum(_h0_cost_floor(p, x) / f for x, f in zip(X, f0))
    return total / samples


# --------------------------------------------------------------------------
# decoupled costs and the simple-H0 statistic
# --------------------------------------------------------------------------


def _probe_estimates(prior: Prior, n: int = 8) -> np.ndarray:
    nodes = prior.nodes
    if nodes.shape[1] == 0:
        return nodes[:1]
    idx = np.unique(np.linspace(0, len(nodes) - 1, n).round().astype(int))
    probes = nodes[idx]
    if prior.continuous:
        probes = np.vstack([probes, prior.lower, prior.upper])
    return probes[:n]


def check_estimate_free(cost: CostFn, estimate_prior: Prior, truth_prior: Prior,
                        name: str, rtol: float = 1e-12):
    """Raise unless ``cost(U, theta)`` is the same for 8 probe estimates ``U``."""
    probes = _probe_estimates(estimate_prior)
    C = apply_cost(cost, probes[:, None, :], truth_prior.nodes[None, :, :])
    spread = np.abs(C - C[:1]).max()
    if spread > rtol * max(1.0, np.abs(C).max()):
        raise PreconditionViolation(f"{name} depends on the estimate (spread {spread:.3g})")
    return C[0]


def decoupled_test_statistic(p: Problem, X, lam: float) -> tuple[float, float]:
    """Both sides of ``D_01 - inf D_11  vs  lam [D_10 - inf D_00]`` (decide H1 when lhs > rhs).

    Valid only when ``c01`` and ``c10`` ignore the estimate; this is probed.
    """
    c01 = check_estimate_free(p.costs.c01, p.h0.prior, p.h1.prior, "c01")
    c10 = check_estimate_free(p.costs.c10, p.h1.prior, p.h0.prior, "c10")
    w0, w1 = _weights(p, X)
    d01, d10 = float(c01 @ w1), float(c10 @ w0)
    inf11 = inner_minimize(_kernel(p.costs.c11, p.h1.prior.nodes, w1), domain_of(p.h1.prior)).value
    inf00 = inner_minimize(_kernel(p.costs.c00, p.h0.prior.nodes, w0), domain_of(p.h0.prior)).value
    return d01 - inf11, lam * (d10 - inf00)


def decoupled_estimators(p: Problem, X) -> tuple[np.ndarray, np.ndarray]:
    """``arg inf_U D_00`` and ``arg inf_U D_11``; independent of the threshold."""
    w0, w1 = _weights(p, X)
    e0 = inner_minimize(_kernel(p.costs.c00, p.h0.prior.nodes, w0), domain_of(p.h0.prior))
    e1 = inner_minimize(_kernel(p.costs.c11, p.h1.prior.nodes, w1), domain_of(p.h1.prior))
    return e0.minimizer, e1.minimizer


def false_alarm_statistic(p: Problem, X) -> float:
    """``(D_01(X) - inf_U D_11(U, X)) / f0(X)`` for a simple H0 and false-alarm costs."""
    if not p.h0.is_simple:
        raise PreconditionViolation("H0 must be simple")
    c00 = check_estimate_free(p.costs.c00, p.h0.prior, p.h0.prior, "c00")
    c10 = check_estimate_free(p.costs.c10, p.h1.prior, p.h0.prior, "c10")
    if not (np.allclose(c00, 0.0, atol=1e-12) and np.allclose(c10, 1.0, atol=1e-12)):
        raise PreconditionViolation("expected c00 = 0 and c10 = 1 (false-alarm constraint)")
    c01 = check_estimate_free(p.costs.c01, p.h0.prior, p.h1.prior, "c01")
    w0, w1 = _weights(p, X)
    num = float(c01 @ w1) - inner_minimize(_kernel(p.costs.c11, p.h1.prior.nodes, w1),
                                           domain_of(p.h1.prior)).value
    f0 = float(w0.sum())
    if f0 > 0:
        return num / f0
    if num > 0:
        return float("inf")
    raise UndefinedStatisticError("numerator and f0(X) both vanish")


def decoupled_evaluator(p: Problem):
    """Exact ``c0(lam, gamma)`` of the optimal rule for decoupled costs on a finite alphabet.

    With ``c01``/``c10`` free of the estimate the rule thresholds
    ``(D_01 - inf D_11) / (D_10 - inf D_00)`` and moving a point to H1 raises
    ``c0`` by ``D_10 - inf D_00``.
    """
    from .calibrate import AtomicEvaluator

    if not p.discrete:
        raise InvalidInputError("exact evaluation needs a finite alphabet")
    stats, weights, base = [], [], 0.0
    for x in p.alphabet:
        lhs, gap = decoupled_test_statistic(p, x, 1.0)
        inf00 = inner_minimize(_kernel(p.costs.c00, p.h0.prior.nodes, _weights(p, x)[0]),
                               domain_of(p.h0.prior)).value
        base += inf00
        if gap > 0:
            stats.append(lhs / gap)
        elif lhs > 0:
            stats.append(float("inf"))
        else:
            continue
        weights.append(gap)
    return AtomicEvaluator(stats, weights, base)

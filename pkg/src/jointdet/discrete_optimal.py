"""Exact optimal detection/estimation when both parameter sets are finite.

Under the detection/estimation-error costs (0 only when both the decision
and the selected subcase are correct) the optimal rule compares the
prior-weighted maximum likelihoods of the two hypotheses against a
threshold, randomizes on equality, and then reports the maximizing subcase
of the decided hypothesis.

Subcases are indexed from 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, UndefinedStatisticError
from .model import CostSpec, DetEstRule, Estimator, HypothesisSpec, Prior, Problem, likelihood_matrix
from .families import discrete_table_family

TIE_RTOL = 1e-12


def close(a: float, b: float, rtol: float = TIE_RTOL) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """Finite alphabet, ``L0``/``L1`` subcase tables and their prior weights."""

    alphabet: tuple
    f0: np.ndarray
    f1: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        M = len(alphabet)
        if M == 0 or len(set(alphabet)) != M:
            raise InvalidInputError("alphabet must be nonempty with distinct points")
        object.__setattr__(self, "alphabet", alphabet)
        for name in ("f0", "f1"):
            t = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if t.shape[1] != M:
                raise InvalidInputError(f"{name} must have {M} columns")
            if np.any(t < 0):
                r, c = np.argwhere(t < 0)[0]
                raise InvalidInputError(f"{name} has a negative entry at (row {r}, column {c})")
            bad = np.abs(t.sum(axis=1) - 1.0) > 1e-12
            if bad.any():
                raise InvalidInputError(f"{name} row {int(np.argmax(bad))} does not sum to 1")
            object.__setattr__(self, name, t)
        for name, L in (("pi0", len(self.f0)), ("pi1", len(self.f1))):
            w = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if len(w) != L or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
                raise InvalidInputError(f"{name} must hold {L} positive weights summing to 1")
            object.__setattr__(self, name, w)

    @property
    def M(self) -> int:
        return len(self.alphabet)

    def table(self, side: int) -> np.ndarray:
        return self.f1 if side else self.f0

    def prior(self, side: int) -> np.ndarray:
        return self.pi1 if side else self.pi0

    def weighted(self, side: int) -> np.ndarray:
        """``pi_l f_l(x)`` as an ``(L, M)`` array."""
        return self.prior(side)[:, None] * self.table(side)

    def index(self, x) -> int:
        try:
            return self.alphabet.index(x)
        except ValueError:
            raise InvalidInputError(f"{x!r} is not in the alphabet") from None


def _argmax_set(values: np.ndarray) -> tuple[int, ...]:
    top = values.max()
    return tuple(int(l) for l in np.flatnonzero(values >= top - TIE_RTOL * abs(top)))


def weighted_max_likelihood(p: DiscreteProblem, side: int, x) -> tuple[float, tuple[int, ...]]:
    """``max_l pi_l f_l(x)`` and every subcase attaining it."""
    col = p.weighted(side)[:, p.index(x)]
    return float(col.max()), _argmax_set(col)


def _ratio(num: float, den: float, x) -> float:
    if den > 0:
        return num / den
    if num > 0:
        return float("inf")
    raise UndefinedStatisticError(f"statistic is 0/0 at {x!r}: the point has zero probability")


def glr_statistic(p: DiscreteProblem, x) -> float:
    """Ratio of the prior-weighted maximum likelihoods, H1 over H0."""
    m1, _ = weighted_max_likelihood(p, 1, x)
    m0, _ = weighted_max_likelihood(p, 0, x)
    return _ratio(m1, m0, x)


def classical_glr_statistic(p: DiscreteProblem, x) -> float:
    """``max_l f_1l(x) / max_l f_0l(x)``, priors ignored."""
    j = p.index(x)
    return _ratio(float(p.f1[:, j].max()), float(p.f0[:, j].max()), x)


def alpha_min(p: DiscreteProblem) -> float:
    """Smallest achievable H0 detection/estimation-error probability."""
    return float(1.0 - p.weighted(0).max(axis=0).sum())


@dataclass(frozen=True)
class RandomizedVerdict:
    """Outcome of the optimal rule at one point.

    ``decision`` is 0, 1, or ``None`` for a randomization that selects H1
    with probability ``gamma``.  ``estimate_sets`` maps each side that may be
    decided to its tied maximizing subcases.
    """

    decision: Optional[int]
    gamma: float
    estimate_sets: dict = field(default_factory=dict)

    @property
    def randomized(self) -> bool:
        return self.decision is None

    @property
    def prob_h1(self) -> float:
        return self.gamma if self.decision is None else float(self.decision)

    @property
    def estimate_set(self) -> tuple[int, ...]:
        if self.decision is None:
            raise AttributeError("randomized verdict carries one estimate set per side")
        return self.estimate_sets[self.decision]

    def estimate(self, side: int = None) -> int:
        """Lowest-index representative of the tie set."""
        side = self.decision if side is None else side
        return min(self.estimate_sets[side])


def _compare(m1: float, m0: float, lam: float) -> int:
    """Sign of ``m1 - lam * m0`` with the relative tie tolerance."""
    rhs = lam * m0
    if close(m1, rhs):
        return 0
    return 1 if m1 > rhs else -1


def decide(p: DiscreteProblem, x, lam: float, gamma: float) -> RandomizedVerdict:
    if lam < 0 or not 0.0 <= gamma <= 1.0:
        raise InvalidInputError("need lam >= 0 and gamma in [0, 1]")
    m1, set1 = weighted_max_likelihood(p, 1, x)
    m0, set0 = weighted_max_likelihood(p, 0, x)
    _ratio(m1, m0, x)
    s = _compare(m1, m0, lam)
    if s > 0:
        return RandomizedVerdict(1, gamma, {1: set1})
    if s < 0:
        return RandomizedVerdict(0, gamma, {0: set0})
    return RandomizedVerdict(None, gamma, {0: set0, 1: set1})


def decision_probabilities(p: DiscreteProblem, lam: float, gamma: float,
                           classical: bool = False) -> np.ndarray:
    """``delta_1(x)`` of the threshold rule on every alphabet point.

    Zero-probability points get ``delta_1 = 0``; they carry no mass.
    """
    if classical:
        num, den = p.f1.max(axis=0), p.f0.max(axis=0)
    else:
        num, den = p.weighted(1).max(axis=0), p.weighted(0).max(axis=0)
    out = np.zeros(p.M)
    for j in range(p.M):
        if num[j] == 0 and den[j] == 0:
            continue
        s = _compare(num[j], den[j], lam)
        out[j] = 1.0 if s > 0 else (gamma if s == 0 else 0.0)
    return out


def _selected_mass(p: DiscreteProblem, side: int, classical: bool) -> np.ndarray:
    """``pi_l f_l(x)`` at the subcase the rule reports on each alphabet point."""
    W = p.weighted(side)
    if not classical:
        sel = W.max(axis=0)
    else:
        # every tied argmax of the unweighted table is a valid report; take the best-weighted
        T = p.table(side)
        tied = T >= T.max(axis=0) - TIE_RTOL * T.max(axis=0)
        sel = np.where(tied, W, -np.inf).max(axis=0)
    return sel


def error_probabilities(p: DiscreteProblem, lam: float, gamma: float,
                        classical: bool = False) -> tuple[float, float]:
    """Detection/estimation-error probabilities ``(c0, c1)`` of the threshold rule.

    Ties in the estimate step contribute their common ``pi f`` value, so the
    result is the same for any split among tied subcases.  With
    ``classical=True`` the prior-free statistic and unweighted argmax are used
    while the costs are still evaluated under the true priors.
    """
    d1 = decision_probabilities(p, lam, gamma, classical)
    correct0 = np.sum((1 - d1) * _selected_mass(p, 0, classical))
    correct1 = np.sum(d1 * _selected_mass(p, 1, classical))
    return float(1.0 - correct0), float(1.0 - correct1)


def statistic_values(p: DiscreteProblem, classical: bool = False) -> np.ndarray:
    """Statistic on every alphabet point; NaN where it is 0/0."""
    if classical:
        num, den = p.f1.max(axis=0), p.f0.max(axis=0)
    else:
        num, den = p.weighted(1).max(axis=0), p.weighted(0).max(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0),
                        np.where(num > 0, np.inf, np.nan))


def c0_evaluator(p: DiscreteProblem, classical: bool = False):
    """Exact ``c0(lam, gamma)`` of the threshold rule with its atom structure.

    Deciding H1 at ``x`` instead of H0 raises ``c0`` by the H0 mass the
    estimator would have captured there, so ``c0 = alpha_min + sum(delta_1 *
    captured)`` (with the classical variant's own baseline).
    """
    from .calibrate import AtomicEvaluator

    stats = statistic_values(p, classical)
    captured = _selected_mass(p, 0, classical)
    keep = ~np.isnan(stats)
    base = float(1.0 - captured.sum())
    return AtomicEvaluator(stats[keep], captured[keep], base=base)


def calibrate(p: DiscreteProblem, alpha: float, classical: bool = False):
    """Threshold and randomization meeting ``c0 = alpha`` exactly."""
    from .calibrate import solve

    return solve(c0_evaluator(p, classical), alpha)


def to_problem(p: DiscreteProblem) -> Problem:
    """The same instance as a general :class:`Problem` with 0-1 costs."""
    h = []
    for side in (0, 1):
        fam = discrete_table_family(p.table(side))
        prior = Prior.point_masses(np.arange(len(p.prior(side)), dtype=float), p.prior(side))
        h.append(HypothesisSpec(fam, prior))
    return Problem(h[0], h[1], CostSpec.zero_one())


def from_problem(problem: Problem, labels: Sequence = None) -> DiscreteProblem:
    """Tabulate a discrete problem with point-mass priors (costs are ignored)."""
    if not problem.discrete:
        raise InvalidInputError("from_problem needs a finite alphabet")
    pts = problem.alphabet
    tables, priors = [], []
    for i in (0, 1):
        h = problem.hypothesis(i)
        if h.prior.continuous:
            raise InvalidInputError("from_problem needs point-mass priors")
        tables.append(likelihood_matrix(h, pts).T)
        priors.append(h.prior.weights)
    labels = tuple(range(len(pts))) if labels is None else tuple(labels)
    return DiscreteProblem(labels, tables[0], tables[1], priors[0], priors[1])


def optimal_rule(p: DiscreteProblem, lam: float, gamma: float) -> DetEstRule:
    """The threshold rule as a :class:`DetEstRule` over the coded alphabet ``0..M-1``.

    Estimates are the lowest-index maximizers.
    """
    d1 = decision_probabilities(p, lam, gamma)
    est = [np.argmax(p.weighted(side), axis=0).astype(float) for side in (0, 1)]

    def delta1(pts):
        return d1[pts[:, 0].astype(int)]

    return DetEstRule(delta1,
                      Estimator(lambda pts: est[0][pts[:, 0].astype(int)][:, None]),
                      Estimator(lambda pts: est[1][pts[:, 0].astype(int)][:, None]))

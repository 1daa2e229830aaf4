"""Hypotheses, priors, costs and randomized two-step detection/estimation rules.

Conventions
-----------
* A sample point ``X`` is a length-``N`` vector.  Every operation accepts a
  single point (shape ``(N,)``, or a scalar when ``N == 1``) or a batch of
  shape ``(n, N)`` and returns a scalar or an ``(n,)`` array accordingly.
* Parameters are vectors of length ``param_dim``.  A simple hypothesis has
  ``param_dim == 0`` and a prior with a single node of shape ``(0,)``.
* Cost functions ``c(U, theta)`` broadcast over leading axes: ``U`` has shape
  ``(..., p_j)`` and ``theta`` has shape ``(..., p_i)``; the result has the
  broadcast leading shape.  ``c_ji`` is the cost of deciding ``H_j`` with
  estimate ``U`` when the truth is ``(H_i, theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError

WEIGHT_TOL = 1e-12
MC_CHUNK = 1 << 16

CostFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def as_points(X, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``X`` to an ``(n, dim)`` float array; report whether it was a single point."""
    x = np.asarray(X, dtype=float)
    if x.ndim == 0:
        if dim != 1:
            raise InvalidInputError(f"scalar sample given for dimension {dim}")
        return x.reshape(1, 1), True
    if x.ndim == 1:
        if x.shape[0] == dim:
            return x[None, :], True
        if dim == 1:
            return x[:, None], False
        raise InvalidInputError(f"sample of length {x.shape[0]} does not match dimension {dim}")
    if x.ndim == 2 and x.shape[1] == dim:
        return x, False
    raise InvalidInputError(f"sample array of shape {x.shape} does not match dimension {dim}")


def _squeeze(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


# --------------------------------------------------------------------------
# densities and priors
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityFamily:
    """Conditional density ``f(X | theta)`` on a discrete alphabet or on R^N.

    ``pdf(points, theta)`` receives an ``(n, N)`` array and one parameter vector
    and returns ``(n,)`` densities.  ``logpdf`` is an optional log-scale hook
    with the same signature; ``sampler(rng, thetas)`` draws one sample per row
    of ``thetas`` and is needed only for Monte Carlo evaluation.
    """

    pdf: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int
    param_dim: int = 0
    alphabet: Optional[np.ndarray] = None
    logpdf: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable[[np.random.Generator, np.ndarray], np.ndarray]] = None
    name: str = "custom"
    pdf_matrix: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 1 or self.param_dim < 0:
            raise InvalidInputError("dim must be >= 1 and param_dim >= 0")
        if self.alphabet is not None:
            a = np.asarray(self.alphabet, dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2 or a.shape[1] != self.dim:
                raise InvalidInputError("alphabet must have shape (M, dim)")
            object.__setattr__(self, "alphabet", a)

    @property
    def discrete(self) -> bool:
        return self.alphabet is not None

    def check_points(self, X) -> tuple[np.ndarray, bool]:
        pts, single = as_points(X, self.dim)
        if self.discrete:
            hit = (pts[:, None, :] == self.alphabet[None, :, :]).all(axis=2).any(axis=1)
            if not hit.all():
                bad = pts[np.argmin(hit)]
                raise InvalidInputError(f"point {bad.tolist()} is not in the alphabet")
        return pts, single

    def density(self, pts: np.ndarray, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(self.param_dim)
        return np.asarray(self.pdf(pts, theta), dtype=float).reshape(len(pts))

    def log_density(self, pts: np.ndarray, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(self.param_dim)
        if self.logpdf is not None:
            return np.asarray(self.logpdf(pts, theta), dtype=float).reshape(len(pts))
        with np.errstate(divide="ignore"):
            return np.log(self.density(pts, theta))


@dataclass(frozen=True, eq=False)
class Prior:
    """Prior over a parameter vector: point masses or a quadrature grid.

    ``nodes`` has shape ``(L, param_dim)``; ``weights`` are positive and sum
    to one.  Quadrature priors approximate a continuous prior; ``density``
    (optional) evaluates that continuous prior and is used where the
    continuum matters (MAP refinement, cellwise posterior integrals).
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "point_masses"
    density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if nodes.ndim != 2 or nodes.shape[0] != weights.shape[0] or len(weights) == 0:
            raise InvalidInputError("prior nodes and weights must have matching nonzero length")
        if self.kind not in ("point_masses", "quadrature", "mixed"):
            raise InvalidInputError(f"unknown prior kind {self.kind!r}")
        if not np.all(weights > 0):
            raise InvalidInputError("prior weights must be strictly positive")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidInputError(f"prior weights sum to {weights.sum()!r}, not 1")
        if self.kind != "quadrature" and len(np.unique(nodes, axis=0)) != len(nodes):
            raise InvalidInputError("point-mass values must be distinct")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.kind == "quadrature":
            lo = nodes.min(axis=0) if self.lower is None else np.asarray(self.lower, float).reshape(-1)
            hi = nodes.max(axis=0) if self.upper is None else np.asarray(self.upper, float).reshape(-1)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    # constructors --------------------------------------------------------

    @classmethod
    def simple(cls) -> "Prior":
        """Degenerate prior of a simple hypothesis (no parameters)."""
        return cls(np.zeros((1, 0)), np.ones(1))

    @classmethod
    def point_masses(cls, values, weights=None) -> "Prior":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if weights is None:
            weights = np.full(len(values), 1.0 / len(values))
        return cls(values, np.asarray(weights, dtype=float))

    @classmethod
    def quadrature(cls, nodes, weights, density=None, lower=None, upper=None) -> "Prior":
        return cls(nodes, weights, kind="quadrature", density=density, lower=lower, upper=upper)

    @classmethod
    def gaussian_grid(cls, mean=0.0, sd=1.0, lower=-8.0, upper=8.0, n=201) -> "Prior":
        """Scalar normal prior on an equispaced grid of ``n`` nodes."""
        nodes = np.linspace(lower, upper, n)
        w = np.exp(-0.5 * ((nodes - mean) / sd) ** 2)

        def density(theta):
            t = np.asarray(theta, dtype=float).reshape(-1)
            return np.exp(-0.5 * ((t - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))

        return cls.quadrature(nodes, w / w.sum(), density=density, lower=[lower], upper=[upper])

    @classmethod
    def uniform_grid(cls, lower, upper, n) -> "Prior":
        """Uniform prior over a box, gridded with ``n`` nodes per coordinate."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        axes = [np.linspace(a, b, n) for a, b in zip(lower, upper)]
        nodes = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        volume = float(np.prod(upper - lower))

        def density(theta):
            t = np.atleast_2d(np.asarray(theta, dtype=float))
            if t.shape[1] != len(lower):
                t = t.reshape(-1, len(lower))
            inside = np.all((t >= lower) & (t <= upper), axis=1)
            return inside / volume

        return cls.quadrature(nodes, np.full(len(nodes), 1.0 / len(nodes)), density=density,
                              lower=lower, upper=upper)

    @classmethod
    def union(cls, first: "Prior", second: "Prior", weight_first: float) -> "Prior":
        """Mixed prior: both node sets, weights scaled by ``weight_first`` / rest."""
        if first.param_dim != second.param_dim:
            raise InvalidInputError("cannot mix priors of different parameter dimension")
        if not 0.0 < weight_first < 1.0:
            raise InvalidInputError("mixing weight must lie in (0, 1)")
        nodes = np.vstack([first.nodes, second.nodes])
        w = np.concatenate([weight_first * first.weights, (1 - weight_first) * second.weights])
        return cls(nodes, w / w.sum(), kind="mixed")

    # queries -------------------------------------------------------------

    @property
    def param_dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def is_simple(self) -> bool:
        return self.size == 1

    @property
    def continuous(self) -> bool:
        return self.kind == "quadrature"

    def pdf(self, theta) -> np.ndarray:
        """Continuous prior density at ``theta``.

        Falls back to node weight over cell width (scalar grids only) when no
        density was supplied.
        """
        if not self.continuous:
            raise InvalidInputError("point-mass priors have no density")
        if self.density is not None:
            return np.asarray(self.density(theta), dtype=float).reshape(-1)
        if self.param_dim != 1:
            raise InvalidInputError("density fallback needs a scalar grid")
        order = np.argsort(self.nodes[:, 0])
        x = self.nodes[order, 0]
        widths = np.gradient(x) if len(x) > 1 else np.ones(1)
        return np.interp(np.asarray(theta, float).reshape(-1), x, self.weights[order] / widths,
                         left=0.0, right=0.0)


@dataclass(frozen=True, eq=False)
class HypothesisSpec:
    family: DensityFamily
    prior: Prior

    def __post_init__(self):
        if self.prior.param_dim != self.family.param_dim:
            raise InvalidInputError(
                f"prior dimension {self.prior.param_dim} != family param_dim {self.family.param_dim}")

    @property
    def is_simple(self) -> bool:
        return self.prior.is_simple


# --------------------------------------------------------------------------
# costs
# --------------------------------------------------------------------------


def apply_cost(cost: CostFn, U: np.ndarray, theta: np.ndarray) -> np.ndarray:
    shape = np.broadcast_shapes(U.shape[:-1], theta.shape[:-1])
    out = np.asarray(cost(U, theta), dtype=float)
    return np.broadcast_to(out, shape)


def constant_cost(value: float) -> CostFn:
    def cost(U, theta):
        return np.full(np.broadcast_shapes(U.shape[:-1], theta.shape[:-1]), float(value))
    cost.constant = float(value)
    return cost


def mismatch_cost(U, theta):
    """Indicator that the estimate differs from the true parameter."""
    return np.any(U != theta, axis=-1).astype(float)


def squared_error(U, theta):
    return np.sum((U - theta) ** 2, axis=-1)


def absolute_error(U, theta):
    return np.sum(np.abs(U - theta), axis=-1)


def window_cost(delta: float) -> CostFn:
    """0 when ``||U - theta|| <= delta``, 1 otherwise."""
    def cost(U, theta):
        return (np.sqrt(np.sum((U - theta) ** 2, axis=-1)) > delta).astype(float)
    return cost


def truth_norm_squared(U, theta):
    """``||theta||^2``, independent of the estimate."""
    return np.broadcast_to(np.sum(theta ** 2, axis=-1),
                           np.broadcast_shapes(U.shape[:-1], theta.shape[:-1]))


def truth_abs(U, theta):
    """``|theta|`` summed over coordinates, independent of the estimate."""
    return np.broadcast_to(np.sum(np.abs(theta), axis=-1),
                           np.broadcast_shapes(U.shape[:-1], theta.shape[:-1]))


@dataclass(frozen=True, eq=False)
class CostSpec:
    """The four costs ``c_ji(U, theta_i)``."""

    c00: CostFn
    c01: CostFn
    c10: CostFn
    c11: CostFn

    def get(self, j: int, i: int) -> CostFn:
        return {(0, 0): self.c00, (0, 1): self.c01, (1, 0): self.c10, (1, 1): self.c11}[(j, i)]

    @classmethod
    def zero_one(cls) -> "CostSpec":
        """Detection/estimation-error costs: 0 only if both steps are right."""
        one = constant_cost(1.0)
        return cls(mismatch_cost, one, one, mismatch_cost)

    @classmethod
    def false_alarm(cls, c11: CostFn, c01: CostFn = None) -> "CostSpec":
        """``c00 = 0``, ``c10 = 1`` so that the H0 cost is the false-alarm probability."""
        return cls(constant_cost(0.0), c01 if c01 is not None else constant_cost(1.0),
                   constant_cost(1.0), c11)


@dataclass(frozen=True, eq=False)
class Problem:
    h0: HypothesisSpec
    h1: HypothesisSpec
    costs: CostSpec

    def __post_init__(self):
        if self.h0.family.dim != self.h1.family.dim:
            raise InvalidInputError("both hypotheses must share the sample dimension")
        if self.h0.family.discrete != self.h1.family.discrete:
            raise InvalidInputError("both hypotheses must share the sample space type")

    def hypothesis(self, i: int) -> HypothesisSpec:
        return self.h1 if i else self.h0

    @property
    def discrete(self) -> bool:
        return self.h0.family.discrete

    @property
    def alphabet(self) -> np.ndarray:
        a0, a1 = self.h0.family.alphabet, self.h1.family.alphabet
        if a0 is None:
            raise InvalidInputError("continuous problem has no alphabet")
        if a1 is not a0 and not np.array_equal(a0, a1):
            return np.unique(np.vstack([a0, a1]), axis=0)
        return a0


# --------------------------------------------------------------------------
# rules
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Estimator:
    """Deterministic or randomized estimator.

    Deterministic: ``fn(points) -> (n, p)``.  Randomized:
    ``fn(points) -> (values (n, K, p), weights (n, K))``.
    """

    fn: Callable
    randomized: bool = False

    @classmethod
    def constant(cls, value) -> "Estimator":
        v = np.asarray(value, dtype=float).reshape(-1)
        return cls(lambda pts: np.broadcast_to(v, (len(pts), len(v))))

    def support(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = len(pts)
        if not self.randomized:
            vals = np.asarray(self.fn(pts), dtype=float)
            if vals.ndim == 1:
                vals = vals[:, None]
            return vals[:, None, :], np.ones((n, 1))
        vals, wts = self.fn(pts)
        vals = np.asarray(vals, dtype=float)
        wts = np.asarray(wts, dtype=float).reshape(n, -1)
        if vals.ndim == 2:
            vals = vals[:, :, None]
        if np.any(wts < 0) or np.any(np.abs(wts.sum(axis=1) - 1.0) > WEIGHT_TOL):
            raise InvalidInputError("randomized estimator weights must be >= 0 and sum to 1")
        return vals, wts


@dataclass(frozen=True, eq=False)
class DetEstRule:
    """Randomized two-step rule: ``delta1(X)`` then the decided side's estimator."""

    delta1: Callable[[np.ndarray], np.ndarray]
    est0: Estimator
    est1: Estimator

    def decision_probability(self, pts: np.ndarray) -> np.ndarray:
        d = np.broadcast_to(np.asarray(self.delta1(pts), dtype=float), (len(pts),))
        if np.any(d < 0) or np.any(d > 1) or np.any(np.isnan(d)):
            raise InvalidInputError("delta1 must lie in [0, 1]")
        return d


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def likelihood_matrix(h: HypothesisSpec, pts: np.ndarray) -> np.ndarray:
    """``F[k, l] = f(X_k | theta_l)`` for validated points."""
    nodes = h.prior.nodes
    if h.family.pdf_matrix is not None:
        F = np.asarray(h.family.pdf_matrix(pts, nodes), dtype=float).reshape(len(pts), len(nodes))
    else:
        F = np.empty((len(pts), len(nodes)))
        for l, theta in enumerate(nodes):
            F[:, l] = h.family.density(pts, theta)
    if np.any(F < 0) or np.any(np.isnan(F)):
        raise InvalidInputError(f"family {h.family.name!r} returned a negative or NaN density")
    return F


def posterior_weights(h: HypothesisSpec, X) -> tuple[np.ndarray, bool]:
    """Unnormalized posterior weights ``pi_l f(X | theta_l)``, shape ``(n, L)``."""
    pts, single = h.family.check_points(X)
    return likelihood_matrix(h, pts) * h.prior.weights, single


def marginal_density(h: HypothesisSpec, X):
    """``f(X) = sum_l pi_l f(X | theta_l)``."""
    W, single = posterior_weights(h, X)
    return _squeeze(W.sum(axis=1), single)


def script_d(h: HypothesisSpec, cost: CostFn, U, X):
    """Cost kernel ``sum_l pi_l c(U, theta_l) f(X | theta_l)``.

    ``h`` is the true hypothesis ``H_i`` and ``cost`` is ``c_ji``; ``U`` is one
    estimate (shape ``(p_j,)``) shared by every point, or one per point
    (shape ``(n, p_j)``).
    """
    W, single = posterior_weights(h, X)
    U = np.asarray(U, dtype=float)
    if U.ndim <= 1:
        U = U.reshape(1, -1)
    elif U.shape[0] != W.shape[0]:
        raise InvalidInputError("per-point estimates must match the number of points")
    C = apply_cost(cost, U[:, None, :], h.prior.nodes[None, :, :])
    return _squeeze(np.sum(W * C, axis=1), single)


@dataclass(frozen=True)
class CostEstimate:
    value: float
    standard_error: float = 0.0
    n_samples: int = 0

    def __float__(self):
        return self.value


def _expected_kernel(h: HypothesisSpec, cost: CostFn, est: Estimator, pts, W):
    vals, wts = est.support(pts)
    C = apply_cost(cost, vals[:, :, None, :], h.prior.nodes[None, None, :, :])
    return np.einsum("nk,nkl,nl->n", wts, C, W)


def chunk_streams(seed: int, n_samples: int, chunk: int = MC_CHUNK):
    """Deterministic per-chunk generators; chunk ``c`` always sees the same stream."""
    n_chunks = -(-n_samples // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for c, child in enumerate(children):
        yield np.random.default_rng(child), min(chunk, n_samples - c * chunk)


def sample_hypothesis(h: HypothesisSpec, rng: np.random.Generator, size: int):
    """Draw ``(theta, X)`` pairs from the prior and the conditional density."""
    if h.family.sampler is None:
        raise InvalidInputError(f"family {h.family.name!r} has no sampler")
    idx = rng.choice(h.prior.size, size=size, p=h.prior.weights)
    thetas = h.prior.nodes[idx]
    X = np.asarray(h.family.sampler(rng, thetas), dtype=float).reshape(size, h.family.dim)
    return thetas, X


def average_cost(p: Problem, rule: DetEstRule, truth: int, samples: int = None,
                 seed: int = None) -> CostEstimate:
    """Average cost ``C_i`` of a rule given the true hypothesis ``H_i``.

    Exact sum over the alphabet for discrete problems; otherwise a seeded
    Monte Carlo mean over ``samples`` joint draws of ``(theta_i, X)``.
    """
    if truth not in (0, 1):
        raise InvalidInputError("truth must be 0 or 1")
    h = p.hypothesis(truth)
    c0, c1 = p.costs.get(0, truth), p.costs.get(1, truth)
    if p.discrete:
        pts = p.alphabet
        W = likelihood_matrix(h, pts) * h.prior.weights
        d1 = rule.decision_probability(pts)
        e0 = _expected_kernel(h, c0, rule.est0, pts, W)
        e1 = _expected_kernel(h, c1, rule.est1, pts, W)
        return CostEstimate(float(np.sum((1 - d1) * e0 + d1 * e1)))
    if samples is None or seed is None or samples < 2:
        raise InvalidInputError("continuous problems need a Monte Carlo sample budget and seed")
    total = total_sq = 0.0
    for rng, size in chunk_streams(seed, samples):
        thetas, X = sample_hypothesis(h, rng, size)
        d1 = rule.decision_probability(X)
        per = np.zeros(size)
        for d, cost, est in ((1 - d1, c0, rule.est0), (d1, c1, rule.est1)):
            vals, wts = est.support(X)
            C = apply_cost(cost, vals, thetas[:, None, :])
            per += d * np.sum(wts * C, axis=1)
        total += per.sum()
        total_sq += np.dot(per, per)
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return CostEstimate(mean, math.sqrt(var / samples), samples)

"""Detection/estimation statistics for the MAP, MMSE and median criteria.

Each criterion pairs a classical Bayesian estimator with a closed-form test.
Costs are decoupled: the two cross costs ``c01`` and ``c10`` depend on the
true parameter only, and ``c00`` / ``c11`` are the estimation losses.

Continuous priors are quadrature priors over a box.  Estimators built on
posterior sums (MMSE) use the node weights directly; estimators that need the
continuum (MAP refinement, the median and its absolute-error risk) use the
prior density with cellwise Gauss-Legendre integration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedEstimatorError, UndefinedStatisticError
from .general_optimal import Domain, check_estimate_free, inner_minimize
from .model import HypothesisSpec, Problem, apply_cost, posterior_weights

GL_POINTS = 8
_GL_T, _GL_W = np.polynomial.legendre.leggauss(GL_POINTS)
TIE_RTOL = 1e-12


def ball_volume(dim: int, radius: float) -> float:
    """Volume of a radius-``radius`` ball in ``dim`` dimensions (1 for ``dim == 0``)."""
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * radius ** dim


@dataclass(frozen=True)
class MapConfig:
    """Window radius of the MAP cost and the parameter dimensions of both sides."""

    delta: float
    dim0: int
    dim1: int

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidInputError("delta must be positive")

    @property
    def v0(self) -> float:
        return ball_volume(self.dim0, self.delta)

    @property
    def v1(self) -> float:
        return ball_volume(self.dim1, self.delta)

    @classmethod
    def for_problem(cls, p: Problem, delta: float) -> "MapConfig":
        cfg = cls(delta, _window_dim(p.h0), _window_dim(p.h1))
        for h in (p.h0, p.h1):
            if h.prior.continuous:
                width = float(np.min(h.prior.upper - h.prior.lower))
                if delta > 0.01 * width:
                    warnings.warn(f"delta={delta} exceeds 1% of the prior support width {width}",
                                  RuntimeWarning)
        return cfg


def _window_dim(h: HypothesisSpec) -> int:
    # point masses keep their own probability inside a small window: no volume factor
    return h.prior.param_dim if h.prior.continuous else 0


# --------------------------------------------------------------------------
# scalar posterior on a quadrature prior
# --------------------------------------------------------------------------


def _likelihood_at(h: HypothesisSpec, pts: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    if h.family.pdf_matrix is not None:
        return np.asarray(h.family.pdf_matrix(pts[:1], thetas), dtype=float).reshape(len(thetas))
    out = np.empty(len(thetas))
    for k, t in enumerate(thetas):
        out[k] = h.family.density(pts, t)[0]
    return out


class ScalarPosterior:
    """Unnormalized posterior ``f(X|theta) pi(theta)`` of a scalar quadrature prior.

    The support ``[lower, upper]`` is cut into cells at the prior nodes and
    each cell integrated with Gauss-Legendre; integrals with interior limits
    re-integrate only the cells that contain a limit.
    """

    def __init__(self, h: HypothesisSpec, X):
        prior = h.prior
        if prior.param_dim != 1 or not prior.continuous:
            raise InvalidInputError("needs a scalar quadrature prior")
        self.h = h
        self.pts, single = h.family.check_points(X)
        if not single:
            raise InvalidInputError("expected a single sample point")
        lo, hi = float(prior.lower[0]), float(prior.upper[0])
        self.edges = np.unique(np.clip(np.concatenate([[lo, hi], prior.nodes[:, 0]]), lo, hi))
        a, b = self.edges[:-1, None], self.edges[1:, None]
        self.t = 0.5 * (a + b) + 0.5 * (b - a) * _GL_T
        self.w = 0.5 * (b - a) * _GL_W
        self.g = self.density(self.t.ravel()).reshape(self.t.shape)
        self.cell_mass = (self.w * self.g).sum(axis=1)
        self.total = float(self.cell_mass.sum())

    def density(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float).reshape(-1)
        prior = self.h.prior.pdf(thetas)
        return _likelihood_at(self.h, self.pts, thetas[:, None]) * prior

    def _piece(self, fn, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        t = 0.5 * (a + b) + 0.5 * (b - a) * _GL_T
        return float(np.sum(0.5 * (b - a) * _GL_W * fn(t) * self.density(t)))

    def integral(self, fn=None, a: float = None, b: float = None) -> float:
        """``int_a^b fn(theta) g(theta) dtheta`` (``fn`` defaults to 1; limits to the support)."""
        fn = (lambda t: np.ones_like(t)) if fn is None else fn
        lo, hi = self.edges[0], self.edges[-1]
        a = lo if a is None else min(max(a, lo), hi)
        b = hi if b is None else min(max(b, lo), hi)
        sign = 1.0
        if b < a:
            a, b, sign = b, a, -1.0
        ia = int(np.clip(np.searchsorted(self.edges, a, side="right") - 1, 0, len(self.edges) - 2))
        ib = int(np.clip(np.searchsorted(self.edges, b, side="left") - 1, 0, len(self.edges) - 2))
        if ia == ib:
            return sign * self._piece(fn, a, b)
        inner = slice(ia + 1, ib)
        total = float(np.sum(self.w[inner] * fn(self.t[inner]) * self.g[inner]))
        total += self._piece(fn, a, self.edges[ia + 1]) + self._piece(fn, self.edges[ib], b)
        return sign * total

    def cdf_nodes(self) -> np.ndarray:
        """Posterior mass below each cell edge (unnormalized)."""
        return np.concatenate([[0.0], np.cumsum(self.cell_mass)])


def _scalar_posterior(h: HypothesisSpec, X) -> ScalarPosterior:
    post = ScalarPosterior(h, X)
    if not post.total > 0:
        raise UndefinedEstimatorError("posterior has zero mass at X")
    return post


def _discrete_posterior(h: HypothesisSpec, X) -> np.ndarray:
    W, single = posterior_weights(h, X)
    if not single:
        raise InvalidInputError("expected a single sample point")
    w = W[0]
    if not w.sum() > 0:
        raise UndefinedEstimatorError("posterior has zero mass at X")
    return w


# --------------------------------------------------------------------------
# MAP
# --------------------------------------------------------------------------


def map_estimate_set(h: HypothesisSpec, X) -> tuple[int, ...]:
    """Indices of the prior nodes maximizing ``pi_l f(X | theta_l)``."""
    w = _discrete_posterior(h, X)
    top = w.max()
    return tuple(int(l) for l in np.flatnonzero(w >= top - TIE_RTOL * top))


def _map_search(h: HypothesisSpec, X, tol: float):
    pts, _ = h.family.check_points(X)

    def neg(U):
        return -_likelihood_at(h, pts, U) * h.prior.pdf(U if U.shape[1] > 1 else U[:, 0])

    return inner_minimize(neg, Domain(h.prior.nodes, h.prior.lower, h.prior.upper), tol)


def map_estimator(h: HypothesisSpec, X, tol: float = 1e-10) -> np.ndarray:
    """Maximizer of ``f(X|U) pi(U)``.

    Point masses: the lowest-index node of :func:`map_estimate_set`.
    Quadrature priors: best node of the prior density, then refined.
    """
    if not h.prior.continuous:
        return h.prior.nodes[map_estimate_set(h, X)[0]].copy()
    return _map_search(h, X, tol).minimizer


def sup_posterior(h: HypothesisSpec, X) -> float:
    """``sup_U f(X|U) pi(U)``; for a simple hypothesis this is ``f(X)``."""
    if not h.prior.continuous:
        return float(_discrete_posterior_raw(h, X).max())
    return -_map_search(h, X, 1e-10).value


def _discrete_posterior_raw(h, X):
    W, single = posterior_weights(h, X)
    if not single:
        raise InvalidInputError("expected a single sample point")
    return W[0]


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    if num > 0:
        return float("inf")
    raise UndefinedStatisticError("numerator and denominator both vanish")


def map_statistic(p: Problem, X, cfg: MapConfig) -> tuple[float, float]:
    """Sup-posterior ratio (H1 over H0) and the threshold factor ``V0/V1``.

    Decide H1 when ``statistic > lam * factor``.  A simple or point-mass
    side contributes a unit volume.
    """
    stat = _ratio(sup_posterior(p.h1, X), sup_posterior(p.h0, X))
    return stat, (cfg.v0 if _window_dim(p.h0) else 1.0) / (cfg.v1 if _window_dim(p.h1) else 1.0)


def window_mass(h: HypothesisSpec, X, delta: float, tol: float = 1e-10) -> float:
    """``sup_U int_{|theta - U| <= delta} f(X|theta) pi(theta) dtheta`` for a scalar prior."""
    post = _scalar_posterior(h, X)

    def neg(U):
        return np.array([-post.integral(None, u - delta, u + delta) for u in U[:, 0]])

    prior = h.prior
    return -inner_minimize(neg, Domain(prior.nodes, prior.lower, prior.upper), tol).value


def map_window_statistic(p: Problem, X, delta: float) -> float:
    """Statistic from the exact window cost, divided by the window volumes.

    Tends to the sup-posterior ratio of :func:`map_statistic` as ``delta -> 0``.
    """
    def side(h):
        if h.prior.is_simple:
            return float(_discrete_posterior_raw(h, X).sum())
        if not h.prior.continuous:
            return float(_discrete_posterior_raw(h, X).max())
        return window_mass(h, X, delta) / ball_volume(1, delta)

    return _ratio(side(p.h1), side(p.h0))


# --------------------------------------------------------------------------
# MMSE
# --------------------------------------------------------------------------


def mmse_estimator(h: HypothesisSpec, X) -> np.ndarray:
    """Posterior mean ``sum theta_l pi_l f(X|theta_l) / sum pi_l f(X|theta_l)``.

    Returns shape ``(p,)`` for one point and ``(n, p)`` for a batch.
    """
    W, single = posterior_weights(h, X)
    tot = W.sum(axis=1)
    if np.any(~(tot > 0)):
        raise UndefinedEstimatorError("posterior has zero mass at X")
    est = (W @ h.prior.nodes) / tot[:, None]
    return est[0] if single else est


def _decoupled_terms(p: Problem, h: HypothesisSpec, cross, other: HypothesisSpec, name: str):
    """Cross cost on ``h``'s nodes, checked to ignore the estimate."""
    return check_estimate_free(cross, other.prior, h.prior, name)


def mmse_statistic(p: Problem, X) -> tuple[float, float]:
    """``(A1, A0)``; decide H1 when ``A1 > lam * A0``.

    ``A_j = ||theta_hat_j||^2 f_j(X) + sum [c(theta) - ||theta||^2] f_j(X|theta) pi_j(theta)``
    with ``c = c01`` on the H1 side and ``c = c10`` on the H0 side.
    """
    out = []
    for h, cross, other, name in ((p.h1, p.costs.c01, p.h0, "c01"),
                                  (p.h0, p.costs.c10, p.h1, "c10")):
        c = _decoupled_terms(p, h, cross, other, name)
        w = _discrete_posterior_raw(h, X)
        f = float(w.sum())
        if h.prior.param_dim == 0:
            out.append(float(c @ w))
            continue
        est = mmse_estimator(h, X) if f > 0 else np.zeros(h.prior.param_dim)
        sq = np.sum(h.prior.nodes ** 2, axis=1)
        out.append(float(est @ est) * f + float((c - sq) @ w))
    return out[0], out[1]


def mmse_simplified_statistic(p: Problem, X) -> float:
    """``(||theta_hat_1||^2 / ||theta_hat_0||^2) (f1/f0)``, or ``||theta_hat_1||^2 f1/f0`` for simple H0.

    Valid when ``c01(theta) = c10(theta) = ||theta||^2`` (or ``c10 = 1`` for a simple H0).
    """
    w1, w0 = _discrete_posterior_raw(p.h1, X), _discrete_posterior_raw(p.h0, X)
    e1 = mmse_estimator(p.h1, X)
    num = float(e1 @ e1) * float(w1.sum())
    if p.h0.prior.param_dim == 0:
        return _ratio(num, float(w0.sum()))
    e0 = mmse_estimator(p.h0, X)
    return _ratio(num, float(e0 @ e0) * float(w0.sum()))


# --------------------------------------------------------------------------
# median
# --------------------------------------------------------------------------


def _require_scalar(h: HypothesisSpec):
    if h.prior.param_dim != 1:
        raise InvalidInputError("the median criterion needs a scalar parameter")


def median_estimator(h: HypothesisSpec, X, tol: float = 1e-12) -> float:
    """Conditional median of the scalar parameter.

    Point masses: the smallest node whose cumulative posterior mass reaches
    one half.  Quadrature priors: the crossing cell is located from the
    cellwise cumulative mass and the crossing solved within it by bisection.
    """
    _require_scalar(h)
    if not h.prior.continuous:
        w = _discrete_posterior(h, X)
        order = np.argsort(h.prior.nodes[:, 0], kind="stable")
        cum = np.cumsum(w[order]) / w.sum()
        k = int(np.argmax(cum >= 0.5 - TIE_RTOL))
        return float(h.prior.nodes[order[k], 0])
    post = _scalar_posterior(h, X)
    cum = post.cdf_nodes() / post.total
    k = int(np.clip(np.searchsorted(cum, 0.5, side="left") - 1, 0, len(post.edges) - 2))
    a, b = float(post.edges[k]), float(post.edges[k + 1])
    target = (0.5 - cum[k]) * post.total
    left = a
    while b - a > tol * max(1.0, abs(a)):
        mid = 0.5 * (a + b)
        if post._piece(lambda t: np.ones_like(t), left, mid) < target:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def absolute_error_risk(h: HypothesisSpec, U: float, X) -> float:
    """``int |U - theta| f(X|theta) pi(theta) dtheta`` (node sum for point masses)."""
    _require_scalar(h)
    if not h.prior.continuous:
        w = _discrete_posterior_raw(h, X)
        return float(np.abs(U - h.prior.nodes[:, 0]) @ w)
    post = ScalarPosterior(h, X)
    return (post.integral(lambda t: U - t, None, U) + post.integral(lambda t: t - U, U, None))


def _cross_integral(h: HypothesisSpec, cross, other: HypothesisSpec, name: str, X) -> float:
    c = check_estimate_free(cross, other.prior, h.prior, name)
    if not h.prior.continuous:
        return float(c @ _discrete_posterior_raw(h, X))
    dummy = np.zeros((1, other.prior.param_dim))
    post = ScalarPosterior(h, X)
    cost = lambda t: apply_cost(cross, dummy, t.reshape(-1, 1)).reshape(t.shape)
    breaks = [0.0] if post.edges[0] < 0 < post.edges[-1] else []
    edges = [None] + breaks + [None]
    return sum(post.integral(cost, a, b) for a, b in zip(edges, edges[1:]))


def median_statistic(p: Problem, X) -> tuple[float, float]:
    """``(A1, A0)``; decide H1 when ``A1 > lam * A0``.

    ``A_1 = int c01 f1 pi1 - inf_U int |U - theta| f1 pi1`` and symmetrically
    for ``A_0`` with ``c10``.  At the conditional median this equals
    ``int [c(theta) + theta sgn(theta_hat - theta)] f(X|theta) pi(theta) dtheta``.
    A simple H0 gives ``A_0 = int c10 f0``.
    """
    out = []
    for h, cross, other, name in ((p.h1, p.costs.c01, p.h0, "c01"),
                                  (p.h0, p.costs.c10, p.h1, "c10")):
        total = _cross_integral(h, cross, other, name, X)
        if h.prior.param_dim == 0:
            out.append(total)
            continue
        out.append(total - absolute_error_risk(h, median_estimator(h, X), X))
    return out[0], out[1]


def signed_mass_to(h: HypothesisSpec, X, upper: float) -> float:
    """``int_0^upper theta f(X|theta) pi(theta) dtheta`` (node sum for point masses)."""
    _require_scalar(h)
    if not h.prior.continuous:
        t = h.prior.nodes[:, 0]
        w = _discrete_posterior_raw(h, X)
        lo, hi = min(0.0, upper), max(0.0, upper)
        inside = (t > lo) & (t < hi)
        return float(np.sign(upper) * (t * w)[inside].sum())
    return ScalarPosterior(h, X).integral(lambda t: t, 0.0, upper)


def median_simplified_statistic(p: Problem, X) -> float:
    """``int_0^{theta_hat_1} theta f1 pi1 / int_0^{theta_hat_0} theta f0 pi0``.

    With a simple H0 the denominator is ``f0(X)``.  Agrees with
    ``A1 / A0`` from :func:`median_statistic` when ``c01 = c10 = |theta|``
    (for a simple H0 with ``c10 = 1``, ``A1 / A0`` is twice this value).
    """
    num = signed_mass_to(p.h1, X, median_estimator(p.h1, X))
    if p.h0.prior.param_dim == 0:
        return _ratio(num, float(_discrete_posterior_raw(p.h0, X).sum()))
    return _ratio(num, signed_mass_to(p.h0, X, median_estimator(p.h0, X)))


def mmse_ratio_batch(p: Problem, X) -> np.ndarray:
    """``A1 / A0`` of :func:`mmse_statistic` for a batch of points (vectorized)."""
    c1 = check_estimate_free(p.costs.c01, p.h0.prior, p.h1.prior, "c01")
    c0 = check_estimate_free(p.costs.c10, p.h1.prior, p.h0.prior, "c10")
    sides = []
    for h, c in ((p.h1, c1), (p.h0, c0)):
        W, _ = posterior_weights(h, X)
        f = W.sum(axis=1)
        if h.prior.param_dim == 0:
            sides.append(W @ c)
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            est = (W @ h.prior.nodes) / f[:, None]
        est = np.where(f[:, None] > 0, est, 0.0)
        sq = np.sum(h.prior.nodes ** 2, axis=1)
        sides.append(np.sum(est ** 2, axis=1) * f + W @ (c - sq))
    a1, a0 = sides
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(a0 > 0, a1 / np.where(a0 > 0, a0, 1.0), np.where(a1 > 0, np.inf, np.nan))
    if np.any(np.isnan(out)):
        raise UndefinedStatisticError("A1 and A0 both vanish at a sample point")
    return out

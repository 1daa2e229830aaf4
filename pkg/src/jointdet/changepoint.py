"""Retrospective detection and localization of a single change in a sample series.

Samples ``x_1..x_tau`` follow the nominal regime and ``x_{tau+1}..x_N`` the
alternative one.  ``tau <= 0`` means the whole series is post-change and
``tau >= N`` means no change occurred.  The prior over the change time is a
vector ``w[0..N]`` with ``w[0] = P(tau <= 0)`` and ``w[N] = P(tau >= N)``.

All statistics are built from the tail log-likelihood ratios

    log T_n = sum_{k > n} [log f_alt(x_k | past) - log f_nom(x_k | past)],  0 <= n < N,

computed from per-sample conditional log-densities by a suffix sum.  Ties
over the change time resolve to the smallest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .discrete_optimal import DiscreteProblem
from .errors import InvalidInputError, UndefinedStatisticError

TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ChangepointModel:
    """Completely known nominal and alternative regimes plus a change-time prior.

    ``log_nominal(X)`` and ``log_alternative(X)`` map a series of length
    ``n_samples`` (or a batch ``(B, N)``) to per-sample conditional
    log-densities of the same shape.  ``sample_nominal(rng, size)`` and
    ``sample_alternative`` draw ``(size, N)`` series from each regime
    (needed only for simulation); they are available in the iid case.
    """

    n_samples: int
    log_nominal: Callable[[np.ndarray], np.ndarray]
    log_alternative: Callable[[np.ndarray], np.ndarray]
    prior: np.ndarray
    iid: bool = True
    sample_nominal: Optional[Callable] = None
    sample_alternative: Optional[Callable] = None

    def __post_init__(self):
        N = int(self.n_samples)
        if N < 1:
            raise InvalidInputError("n_samples must be at least 1")
        w = np.asarray(self.prior, dtype=float).reshape(-1)
        if len(w) != N + 1:
            raise InvalidInputError(f"prior must have N+1 = {N + 1} entries, got {len(w)}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"prior must be nonnegative and sum to 1 (sum {w.sum()!r})")
        if not w[N] < 1:
            raise InvalidInputError("prior puts all its mass on 'no change'")
        object.__setattr__(self, "n_samples", N)
        object.__setattr__(self, "prior", w)

    @property
    def change_weights(self) -> np.ndarray:
        """``pi_n = w_n / (1 - w_N)`` for ``n = 0..N-1``: the change-time prior given a change."""
        return self.prior[:-1] / (1.0 - self.prior[-1])

    def series(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=float)
        if x.shape[-1] != self.n_samples or x.ndim not in (1, 2):
            raise InvalidInputError(
                f"series must have length N = {self.n_samples}, got shape {x.shape}")
        return x

    def log_densities(self, X) -> tuple[np.ndarray, np.ndarray]:
        x = self.series(X)
        l_nom = np.asarray(self.log_nominal(x), dtype=float).reshape(x.shape)
        l_alt = np.asarray(self.log_alternative(x), dtype=float).reshape(x.shape)
        return l_nom, l_alt


def uniform_prior(n_samples: int, no_change: float = 0.5) -> np.ndarray:
    """Mass ``no_change`` on ``tau >= N`` and equal mass on each ``tau = 0..N-1``."""
    if not 0.0 <= no_change < 1.0:
        raise InvalidInputError("no_change must lie in [0, 1)")
    w = np.full(n_samples + 1, (1.0 - no_change) / n_samples)
    w[-1] = no_change
    return w


def geometric_prior(n_samples: int, rho: float, at_start: float = 0.0) -> np.ndarray:
    """Geometric change time: ``P(tau <= 0) = at_start`` and a per-step hazard ``rho``."""
    if not 0.0 < rho < 1.0 or not 0.0 <= at_start < 1.0:
        raise InvalidInputError("need 0 < rho < 1 and 0 <= at_start < 1")
    n = np.arange(1, n_samples)
    w = np.empty(n_samples + 1)
    w[0] = at_start
    w[1:n_samples] = (1 - at_start) * rho * (1 - rho) ** (n - 1)
    w[n_samples] = (1 - at_start) * (1 - rho) ** (n_samples - 1)
    return w


def iid_model(logpdf_nominal, logpdf_alternative, prior, sample_nominal=None,
              sample_alternative=None) -> ChangepointModel:
    """Memoryless regimes given by elementwise log-densities and optional scalar samplers.

    Samplers have the signature ``(rng, shape) -> array``.
    """
    prior = np.asarray(prior, dtype=float)
    N = len(prior) - 1

    def wrap(sampler):
        if sampler is None:
            return None
        return lambda rng, size: sampler(rng, (size, N))

    return ChangepointModel(N, logpdf_nominal, logpdf_alternative, prior, True,
                            wrap(sample_nominal), wrap(sample_alternative))


def gaussian_shift_model(n_samples: int, shift: float, sd: float = 1.0,
                         prior=None) -> ChangepointModel:
    """``N(0, sd^2)`` before the change and ``N(shift, sd^2)`` after it."""
    prior = uniform_prior(n_samples) if prior is None else prior
    c = math.log(sd) + 0.5 * math.log(2 * math.pi)

    def nominal(x):
        return -0.5 * (x / sd) ** 2 - c

    def alternative(x):
        return -0.5 * ((x - shift) / sd) ** 2 - c

    return iid_model(nominal, alternative, prior,
                     lambda rng, shape: sd * rng.standard_normal(shape),
                     lambda rng, shape: shift + sd * rng.standard_normal(shape))


def bernoulli_model(p_nominal: float, p_alternative: float, prior) -> ChangepointModel:
    """Binary samples (0/1) with success probability switching at the change."""
    def logpmf(p):
        def f(x):
            x = np.asarray(x, dtype=float)
            if np.any((x != 0) & (x != 1)):
                raise InvalidInputError("binary series must contain only 0 and 1")
            with np.errstate(divide="ignore"):
                return np.where(x == 1, np.log(p), np.log1p(-p))
        return f

    def sampler(p):
        return lambda rng, shape: (rng.random(shape) < p).astype(float)

    return iid_model(logpmf(p_nominal), logpmf(p_alternative), prior,
                     sampler(p_nominal), sampler(p_alternative))


def sample_series(model: ChangepointModel, rng: np.random.Generator, tau: int,
                  size: int = 1) -> np.ndarray:
    """Draw ``(size, N)`` iid series whose change happens after sample ``tau``."""
    if not model.iid or model.sample_nominal is None or model.sample_alternative is None:
        raise InvalidInputError("sampling needs an iid model with both samplers")
    tau = min(max(int(tau), 0), model.n_samples)
    X = model.sample_nominal(rng, size)
    X[:, tau:] = model.sample_alternative(rng, size)[:, tau:]
    return X


# --------------------------------------------------------------------------
# likelihoods
# --------------------------------------------------------------------------


def segment_log_likelihood(model: ChangepointModel, X, tau: int) -> float:
    l_nom, l_alt = model.log_densities(X)
    if l_nom.ndim != 1:
        raise InvalidInputError("expected a single series")
    tau = min(max(int(tau), 0), model.n_samples)
    return float(l_nom[:tau].sum() + l_alt[tau:].sum())


def segment_likelihood(model: ChangepointModel, X, tau: int) -> float:
    """Joint density of the series when the change follows sample ``tau``.

    ``tau <= 0`` gives the full alternative density and ``tau >= N`` the
    full nominal one.
    """
    return math.exp(segment_log_likelihood(model, X, tau))


def log_tail_ratios(model: ChangepointModel, X) -> np.ndarray:
    """``log T_n`` for ``n = 0..N-1`` (last axis), single series or batch."""
    l_nom, l_alt = model.log_densities(X)
    with np.errstate(invalid="ignore"):
        diff = l_alt - l_nom
    if np.any(np.isnan(diff)):
        raise UndefinedStatisticError("a sample has zero density under both regimes")
    # suffix sums: entry n holds sum_{k >= n} in 0-based sample indexing
    return np.flip(np.cumsum(np.flip(diff, axis=-1), axis=-1), axis=-1)


def likelihood_ratio_tail(model: ChangepointModel, X, n: int) -> float:
    """``T_n``: alternative-over-nominal likelihood ratio of samples ``n+1..N``."""
    if not 0 <= n < model.n_samples:
        raise InvalidInputError(f"n must satisfy 0 <= n < N = {model.n_samples}")
    lt = log_tail_ratios(model, X)
    if lt.ndim != 1:
        raise InvalidInputError("expected a single series")
    return float(np.exp(lt[n]))


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CpStatistic:
    """Statistic value, its maximizing change time and the tied maximizers."""

    value: float
    tau_hat: int
    ties: tuple = ()

    def __iter__(self):
        return iter((self.value, self.tau_hat))


def _argmax_smallest(log_values: np.ndarray, offset: int = 0) -> CpStatistic:
    top = log_values.max()
    if top == -np.inf:
        return CpStatistic(0.0, offset, tuple(range(offset, offset + len(log_values))))
    if top == np.inf:
        tied = np.flatnonzero(log_values == np.inf)
    else:
        # relative tolerance on the values, expressed on the log scale
        tied = np.flatnonzero(log_values >= top + math.log1p(-TIE_RTOL))
    ties = tuple(int(k) + offset for k in tied)
    return CpStatistic(float(np.exp(top)), ties[0], ties)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    top = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True)) + safe
    out = np.where(np.isposinf(top), np.inf, out)
    return np.squeeze(out, axis=axis)


def _single(model: ChangepointModel, X) -> np.ndarray:
    lt = log_tail_ratios(model, X)
    if lt.ndim != 1:
        raise InvalidInputError("expected a single series")
    return lt


def cusum_statistic(model: ChangepointModel, X) -> CpStatistic:
    """``S_N = max_{0 <= n < N} T_n`` and its argmax."""
    return _argmax_smallest(_single(model, X))


def bayes_cp_statistic(model: ChangepointModel, X) -> CpStatistic:
    """``max_n pi_n T_n`` with ``pi_n = w_n / (1 - w_N)``, and its argmax."""
    with np.errstate(divide="ignore"):
        return _argmax_smallest(_single(model, X) + np.log(model.change_weights))


def _window_logs(model: ChangepointModel, lt: np.ndarray, m: int, uniform: bool) -> np.ndarray:
    N = model.n_samples
    if m < 0 or N - m <= m:
        raise InvalidInputError(
            f"window m={m} leaves no center in m <= n < N - m for N = {N} (need 2m < N)")
    if not uniform:
        with np.errstate(divide="ignore"):
            lt = lt + np.log(model.change_weights)
    centers = np.arange(m, N - m)
    idx = centers[:, None] + np.arange(-m, m + 1)[None, :]
    return _logsumexp(lt[..., idx], axis=-1)


def windowed_statistic(model: ChangepointModel, X, m: int, uniform: bool = True) -> CpStatistic:
    """``max_{m <= n < N-m} sum_{|k| <= m} pi_{n+k} T_{n+k}`` and the maximizing center.

    ``uniform=True`` drops the prior weights.  ``m = 0`` gives the CUSUM (or
    Bayes) statistic.
    """
    return _argmax_smallest(_window_logs(model, _single(model, X), m, uniform), offset=m)


def batch_statistic(model: ChangepointModel, X: np.ndarray, m: int = None,
                    uniform: bool = False) -> np.ndarray:
    """Statistic values for a batch ``(B, N)`` of series.

    ``m=None`` is the Bayes statistic (or CUSUM with ``uniform=True``);
    otherwise the windowed statistic.
    """
    lt = log_tail_ratios(model, np.atleast_2d(X))
    if m is None:
        if not uniform:
            with np.errstate(divide="ignore"):
                lt = lt + np.log(model.change_weights)
        return np.exp(lt.max(axis=-1))
    return np.exp(_window_logs(model, lt, m, uniform).max(axis=-1))


@dataclass(frozen=True)
class CpVerdict:
    """``decision`` is 0, 1 or ``None`` (randomize; H1 with probability ``gamma``).

    ``tau_hat`` is set whenever deciding a change is possible.
    """

    decision: Optional[int]
    gamma: float
    tau_hat: Optional[int]
    statistic: float


def cp_decide(model: ChangepointModel, X, lam: float, gamma: float, m: int = None,
              uniform: bool = False) -> CpVerdict:
    """Threshold the Bayes (``m=None``) or windowed statistic at ``lam``."""
    if lam <= 0 or not 0.0 <= gamma <= 1.0:
        raise InvalidInputError("need lam > 0 and gamma in [0, 1]")
    if m is None:
        s = cusum_statistic(model, X) if uniform else bayes_cp_statistic(model, X)
    else:
        s = windowed_statistic(model, X, m, uniform)
    if s.value == lam or abs(s.value - lam) <= TIE_RTOL * max(s.value, lam):
        return CpVerdict(None, gamma, s.tau_hat, s.value)
    if s.value > lam:
        return CpVerdict(1, gamma, s.tau_hat, s.value)
    return CpVerdict(0, gamma, None, s.value)


def to_discrete_problem(model: ChangepointModel, alphabet=(0.0, 1.0)) -> tuple[DiscreteProblem, list]:
    """Enumerate every series over a finite per-sample alphabet.

    H0 is "no change" (the nominal density); H1 has one subcase per change
    time ``n = 0..N-1`` with prior ``pi_n``.  Returns the problem and the list
    of series in alphabet order.  Exponential in ``N``.
    """
    N = model.n_samples
    if len(alphabet) ** N > 1 << 16:
        raise InvalidInputError("too many series to enumerate")
    pi = model.change_weights
    if np.any(pi <= 0):
        raise InvalidInputError("every change time needs positive prior mass")
    grids = np.meshgrid(*[np.asarray(alphabet, dtype=float)] * N, indexing="ij")
    series = np.stack([g.ravel() for g in grids], axis=1)
    f0 = np.array([[segment_likelihood(model, x, N) for x in series]])
    f1 = np.array([[segment_likelihood(model, x, n) for x in series] for n in range(N)])
    for t in (f0, f1):
        t /= t.sum(axis=1, keepdims=True)  # exact up to rounding for a complete alphabet
    labels = tuple(tuple(x) for x in series)
    return DiscreteProblem(labels, f0, f1, [1.0], pi), [np.array(x) for x in series]

"""Threshold and randomization selection so the H0-side cost meets its level.

Every optimal rule in this package has the shape "decide H1 when a statistic
exceeds ``lam``, randomize with probability ``gamma`` on equality".  An
*evaluator* maps ``(lam, gamma)`` to the resulting H0 cost ``c0``.  It may
return a bare float or a ``(c0, standard_error)`` pair, and may expose an
``atoms()`` method listing the statistic values that carry positive mass,
which switches :func:`solve` to exact atom calibration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import InvalidInputError
from .model import chunk_streams

EXACT_TOL = 1e-12
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class CalibrationResult:
    lam: float
    gamma: float
    achieved_c0: float
    standard_error: float = 0.0
    status: str = "exact"
    iterations: int = 0
    notes: tuple = ()

    @property
    def reachable(self) -> bool:
        return self.status in ("exact", "monte_carlo")


def _evaluate(evaluator, lam: float, gamma: float) -> tuple[float, float]:
    out = evaluator(lam, gamma)
    if isinstance(out, tuple):
        return float(out[0]), float(out[1])
    return float(out), 0.0


def _merge_atoms(values: np.ndarray, weights: np.ndarray):
    """Group statistic values equal within the relative tie tolerance."""
    order = np.argsort(values, kind="stable")
    vals, wts = values[order], weights[order]
    atoms, masses = [], []
    for v, w in zip(vals, wts):
        if atoms and (v == atoms[-1] or abs(v - atoms[-1]) <= TIE_RTOL * max(abs(v), abs(atoms[-1]))):
            masses[-1] += w
        else:
            atoms.append(v)
            masses.append(w)
    return np.array(atoms), np.array(masses)


class AtomicEvaluator:
    """``c0 = base + sum_{s > lam} w + gamma * sum_{s = lam} w`` over finitely many points.

    ``stats`` are per-point statistic values (``inf`` allowed) and ``weights``
    the per-point increase of ``c0`` when the point is moved from H0 to H1.
    """

    def __init__(self, stats, weights, base: float = 0.0):
        stats = np.asarray(stats, dtype=float).reshape(-1)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if stats.shape != weights.shape or np.any(np.isnan(stats)):
            raise InvalidInputError("stats and weights must be matching, NaN-free arrays")
        self.stats, self.weights, self.base = stats, weights, float(base)
        self._atoms, self._masses = _merge_atoms(stats, weights)

    def __call__(self, lam: float, gamma: float) -> float:
        above, on = 0.0, 0.0
        for a, m in zip(self._atoms, self._masses):
            if a == lam or (np.isfinite(a) and abs(a - lam) <= TIE_RTOL * max(abs(a), abs(lam))):
                on += m
            elif a > lam:
                above += m
        return self.base + above + gamma * on

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Finite statistic values with positive mass, ascending, and their masses."""
        keep = np.isfinite(self._atoms) & (self._masses > 0)
        return self._atoms[keep], self._masses[keep]

    @property
    def always_h1(self) -> float:
        """Cost of the rule that decides H1 at every finite-statistic point."""
        return self.base + float(self._masses.sum())

    @property
    def never_h1(self) -> float:
        """Cost in the ``lam -> inf`` limit (infinite statistics still go to H1)."""
        return self.base + float(self._masses[np.isinf(self._atoms)].sum())


class EmpiricalEvaluator:
    """False-alarm probability estimated from statistic values drawn under H0.

    One fixed sample is reused for every ``lam`` (common random numbers), so
    ``c0(lam)`` is a deterministic step function.
    """

    def __init__(self, stats):
        s = np.sort(np.asarray(stats, dtype=float).reshape(-1))
        if len(s) < 2 or np.any(np.isnan(s)):
            raise InvalidInputError("need at least two NaN-free statistic samples")
        self.sorted = s

    @property
    def n(self) -> int:
        return len(self.sorted)

    def __call__(self, lam: float, gamma: float) -> tuple[float, float]:
        s, n = self.sorted, len(self.sorted)
        lo = np.searchsorted(s, lam * (1 - TIE_RTOL) if lam > 0 else lam, side="left")
        hi = np.searchsorted(s, lam * (1 + TIE_RTOL) if lam > 0 else lam, side="right")
        n_on, n_above = hi - lo, n - hi
        mean = (n_above + gamma * n_on) / n
        second = (n_above + gamma * gamma * n_on) / n
        var = max(second - mean * mean, 0.0) * n / (n - 1)
        return mean, math.sqrt(var / n)


def monte_carlo_evaluator(statistic: Callable[[np.ndarray], np.ndarray],
                          sampler: Callable[[np.random.Generator, int], np.ndarray],
                          budget: int = 1_000_000, seed: int = 0,
                          chunk: int = 1 << 16) -> EmpiricalEvaluator:
    """Draw ``budget`` H0 samples in deterministic chunks and tabulate the statistic."""
    parts = []
    for rng, size in chunk_streams(seed, budget, chunk):
        parts.append(np.asarray(statistic(sampler(rng, size)), dtype=float).reshape(size))
    return EmpiricalEvaluator(np.concatenate(parts))


def cost_curve(evaluator, lambdas: Iterable[float]) -> list[tuple[float, float, float]]:
    """``(lam, c0 at gamma=0, c0 at gamma=1)`` along a strictly increasing grid."""
    lambdas = [float(l) for l in lambdas]
    if any(l < 0 for l in lambdas) or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise InvalidInputError("lambda grid must be nonnegative and strictly increasing")
    rows = []
    for lam in lambdas:
        try:
            rows.append((lam, _evaluate(evaluator, lam, 0.0)[0], _evaluate(evaluator, lam, 1.0)[0]))
        except Exception as exc:
            raise type(exc)(f"evaluator failed at lambda={lam!r}: {exc}") from exc
    return rows


def monotonicity_violations(curve) -> list[str]:
    notes = []
    for (l0, a0, b0), (l1, a1, b1) in zip(curve, curve[1:]):
        if a1 > a0 + EXACT_TOL or b1 > b0 + EXACT_TOL:
            notes.append(f"c0 increased between lambda={l0!r} and lambda={l1!r}")
    for lam, a, b in curve:
        if a > b + EXACT_TOL:
            notes.append(f"c0(gamma=0) > c0(gamma=1) at lambda={lam!r}")
    return notes


def _solve_atoms(evaluator, target: float) -> CalibrationResult:
    atoms, masses = evaluator.atoms()
    low, high = evaluator.never_h1, evaluator.always_h1
    if target < low - EXACT_TOL:
        return CalibrationResult(float("inf"), 0.0, low, status="unreachable_low")
    if target > high + EXACT_TOL:
        return CalibrationResult(0.0, 1.0, high, status="unreachable_high")
    if len(atoms) == 0:
        return CalibrationResult(1.0, 0.0, _evaluate(evaluator, 1.0, 0.0)[0])
    # c0 just above atom k is floor[k]; at atom k with gamma it is floor[k] + gamma*mass[k]
    floor = low + np.concatenate([np.cumsum(masses[::-1])[::-1][1:], [0.0]])
    iterations = 0
    for k in range(len(atoms) - 1, -1, -1):
        iterations += 1
        if abs(target - floor[k]) <= EXACT_TOL:
            upper = atoms[k + 1] if k + 1 < len(atoms) else None
            lam = 0.5 * (atoms[k] + upper) if upper is not None else atoms[k] + max(1.0, abs(atoms[k]))
            return _finish(evaluator, lam, 0.0, target, iterations)
        if target < floor[k] + masses[k]:
            gamma = (target - floor[k]) / masses[k]
            return _finish(evaluator, float(atoms[k]), float(min(max(gamma, 0.0), 1.0)), target,
                           iterations)
    # target equals the always-H1 cost
    lam = 0.5 * atoms[0] if atoms[0] > 0 else 0.0
    return _finish(evaluator, lam, 0.0 if atoms[0] > 0 else 1.0, target, iterations)


def _finish(evaluator, lam, gamma, target, iterations, status="exact", notes=()):
    c0, se = _evaluate(evaluator, lam, gamma)
    if status == "exact" and abs(c0 - target) > EXACT_TOL:
        notes = notes + (f"achieved {c0!r} differs from target {target!r}",)
    return CalibrationResult(float(lam), float(gamma), c0, se, status, iterations, tuple(notes))


def solve(evaluator, target_alpha: float, tol: float = 1e-10,
          max_iter: int = 400) -> CalibrationResult:
    """Pick ``(lam, gamma)`` with ``c0(lam, gamma) = target_alpha``.

    Evaluators exposing ``atoms()`` are solved exactly on the sorted atoms.
    Others are bisected on ``log(lam)`` until the ``gamma = 0`` and
    ``gamma = 1`` costs bracket the target or the bracket is narrower than
    ``tol`` (relative); ``gamma`` is then solved linearly on the atom at
    ``lam`` if there is one, else set to 0.
    """
    if not 0.0 < target_alpha < 1.0:
        raise InvalidInputError("target alpha must lie in (0, 1)")
    if hasattr(evaluator, "atoms"):
        return _solve_atoms(evaluator, target_alpha)

    probes = [2.0 ** k for k in range(-30, 31, 6)]
    notes = tuple(monotonicity_violations(cost_curve(evaluator, probes)))
    for note in notes:
        warnings.warn(note, RuntimeWarning)

    def g(lam):
        return _evaluate(evaluator, lam, 0.0)

    def G(lam):
        return _evaluate(evaluator, lam, 1.0)

    lo, hi = 1.0, 1.0
    it = 0
    while G(lo)[0] < target_alpha:
        lo /= 2.0
        it += 1
        if lo < 1e-300:
            c, se = G(lo)
            return CalibrationResult(0.0, 1.0, c, se, "unreachable_high", it, notes)
    while g(hi)[0] > target_alpha:
        hi *= 2.0
        it += 1
        if hi > 1e300:
            c, se = g(hi)
            return CalibrationResult(float("inf"), 0.0, c, se, "unreachable_low", it, notes)
    status = "monte_carlo" if g(hi)[1] > 0 or G(lo)[1] > 0 else "exact"
    for _ in range(max_iter):
        c_lo, c_hi = g(hi)[0], G(hi)[0]
        if c_lo <= target_alpha <= c_hi:
            break
        if hi / lo - 1.0 < tol:
            break
        mid = math.sqrt(lo * hi)
        it += 1
        if g(mid)[0] <= target_alpha:
            hi = mid
        else:
            lo = mid
    c_lo, c_hi = g(hi)[0], G(hi)[0]
    gamma = (target_alpha - c_lo) / (c_hi - c_lo) if c_hi - c_lo > 0 and c_lo <= target_alpha <= c_hi else 0.0
    c0, se = _evaluate(evaluator, hi, gamma)
    return CalibrationResult(float(hi), float(gamma), c0, se, status, it, notes)

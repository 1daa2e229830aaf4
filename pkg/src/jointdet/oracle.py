"""Independent optimality certificates for finite problems.

Over a finite alphabet every randomized two-step rule is described by the
products ``r[x, (i, l)] = delta_i(x) q_il(x)``, which are nonnegative and sum
to one at each ``x``.  Both average costs are linear in ``r``, so the
constrained problem is a small linear program.  Two solvers are provided and
they share no code with the threshold rules they certify:

* a dense two-phase primal simplex with Bland's anti-cycling rule, and
* an exact maximization of the concave piecewise-linear Lagrange dual over
  its breakpoints, followed by primal recovery on the boundary.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InstanceTooLargeError, InvalidInputError
from .model import Problem, script_d

PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class LpSolution:
    optimal_c1: float
    rule_weights: np.ndarray
    choices: tuple
    binding: bool
    achieved_c0: float
    method: str
    multiplier: float = float("nan")


def lp_coefficients(p) -> tuple[np.ndarray, np.ndarray, tuple]:
    """Per-point H1-cost and H0-cost coefficients of every (decision, estimate) choice.

    Accepts a ``DiscreteProblem`` (detection/estimation-error costs) or a
    discrete :class:`Problem` with point-mass priors.  Returns ``a`` and ``b``
    of shape ``(M, K)`` with ``C1 = sum(a * r)`` and ``C0 = sum(b * r)``.
    """
    if isinstance(p, Problem):
        if not p.discrete:
            raise InvalidInputError("the LP oracle needs a finite alphabet")
        pts = p.alphabet
        cols_a, cols_b, choices = [], [], []
        for j in (0, 1):
            hj = p.hypothesis(j)
            if hj.prior.continuous:
                raise InvalidInputError("the LP oracle needs point-mass priors")
            for l, u in enumerate(hj.prior.nodes):
                cols_a.append(np.atleast_1d(script_d(p.h1, p.costs.get(j, 1), u, pts)))
                cols_b.append(np.atleast_1d(script_d(p.h0, p.costs.get(j, 0), u, pts)))
                choices.append((j, l))
        return np.stack(cols_a, axis=1), np.stack(cols_b, axis=1), tuple(choices)
    W0 = p.pi0[:, None] * p.f0
    W1 = p.pi1[:, None] * p.f1
    tot0, tot1 = W0.sum(axis=0), W1.sum(axis=0)
    a = np.concatenate([np.repeat(tot1[:, None], len(W0), axis=1), tot1[:, None] - W1.T], axis=1)
    b = np.concatenate([tot0[:, None] - W0.T, np.repeat(tot0[:, None], len(W1), axis=1)], axis=1)
    choices = tuple([(0, l) for l in range(len(W0))] + [(1, l) for l in range(len(W1))])
    return a, b, choices


def _drop_null_points(a, b):
    keep = (np.abs(a).sum(axis=1) > 0) | (np.abs(b).sum(axis=1) > 0)
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} zero-probability sample point(s)",
                      RuntimeWarning)
    return keep


# --------------------------------------------------------------------------
# primal simplex
# --------------------------------------------------------------------------


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(len(T)):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _optimize(T, basis, cost, allowed, max_iter=50_000):
    """Bland's-rule simplex iterations on a canonical tableau; returns objective."""
    for _ in range(max_iter):
        cb = cost[basis]
        reduced = cost[:-1] - cb @ T[:, :-1]
        enter = next((j for j in allowed if reduced[j] < -1e-11), None)
        if enter is None:
            return float(cb @ T[:, -1])
        col = T[:, enter]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if len(rows) == 0:
            raise InvalidInputError("linear program is unbounded")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-14 * max(1.0, abs(best))]
        leave = min(tied, key=lambda i: basis[i])
        _pivot(T, basis, leave, enter)
    raise RuntimeError("simplex iteration limit reached")


def simplex(c, A_ub, b_ub, A_eq, b_eq) -> tuple[np.ndarray, float]:
    """Minimize ``c x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, float)
    A_ub, b_ub = np.atleast_2d(np.asarray(A_ub, float)), np.asarray(b_ub, float).reshape(-1)
    A_eq, b_eq = np.atleast_2d(np.asarray(A_eq, float)), np.asarray(b_eq, float).reshape(-1)
    n, m_ub, m_eq = len(c), len(b_ub), len(b_eq)
    A = np.zeros((m_ub + m_eq, n + m_ub))
    A[:m_ub, :n], A[:m_ub, n:], A[m_ub:, :n] = A_ub, np.eye(m_ub), A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    m, nt = A.shape

    T = np.zeros((m, nt + m + 1))
    T[:, :nt], T[:, nt:nt + m], T[:, -1] = A, np.eye(m), b
    basis = list(range(nt, nt + m))
    phase1 = np.zeros(nt + m + 1)
    phase1[nt:nt + m] = 1.0
    if _optimize(T, basis, phase1, range(nt + m)) > 1e-9:
        raise InfeasibleError("linear program is infeasible")

    keep = []
    for i in range(m):
        if basis[i] >= nt:
            j = next((j for j in range(nt) if abs(T[i, j]) > PIVOT_TOL), None)
            if j is None:
                continue  # redundant row
            _pivot(T, basis, i, j)
        keep.append(i)
    T = np.concatenate([T[keep, :nt], T[keep, -1:]], axis=1)
    basis = [basis[i] for i in keep]

    phase2 = np.zeros(nt + 1)
    phase2[:n] = c
    value = _optimize(T, basis, phase2, range(nt))
    x = np.zeros(nt)
    x[basis] = T[:, -1]
    return x[:n], value


def _lp_simplex(a, b, alpha):
    M, K = a.shape
    A_eq = np.zeros((M, M * K))
    for x in range(M):
        A_eq[x, x * K:(x + 1) * K] = 1.0
    r, value = simplex(a.ravel(), b.ravel()[None, :], [alpha], A_eq, np.ones(M))
    return r.reshape(M, K), value, float("nan")


# --------------------------------------------------------------------------
# Lagrange dual
# --------------------------------------------------------------------------


def _dual_value(a, b, lam, alpha):
    return float(np.min(a + lam * b, axis=1).sum() - lam * alpha)


def _lp_dual(a, b, alpha):
    M, K = a.shape
    cands = {0.0}
    for x in range(M):
        for k in range(K):
            for j in range(K):
                db = b[x, j] - b[x, k]
                if db > 0:
                    lam = (a[x, k] - a[x, j]) / db
                    if lam > 0:
                        cands.add(float(lam))
    lam = max(sorted(cands), key=lambda l: _dual_value(a, b, l, alpha))
    comb = a + lam * b
    best = comb.min(axis=1, keepdims=True)
    active = comb <= best + 1e-12 * np.maximum(1.0, np.abs(best))
    # cheapest and costliest H0 choice among the minimizers at each point
    b_act = np.where(active, b, np.inf)
    lo = np.argmin(np.where(b_act == b_act.min(axis=1, keepdims=True), np.where(active, a, np.inf),
                            np.inf), axis=1)
    hi = np.argmax(np.where(active, b, -np.inf), axis=1)
    rows = np.arange(M)
    c0_lo, c0_hi = b[rows, lo].sum(), b[rows, hi].sum()
    r = np.zeros((M, K))
    if c0_lo >= alpha or lam == 0.0 or c0_hi <= c0_lo:
        r[rows, lo] = 1.0
    else:
        t = min(max((alpha - c0_lo) / (c0_hi - c0_lo), 0.0), 1.0)
        r[rows, lo] += 1.0 - t
        r[rows, hi] += t
    return r, float((a * r).sum()), lam


def lp_optimal(p, target_alpha: float, method: str = "simplex") -> LpSolution:
    """Minimum H1 cost over all randomized rules with H0 cost at most ``target_alpha``."""
    a, b, choices = lp_coefficients(p)
    keep = _drop_null_points(a, b)
    a, b = a[keep], b[keep]
    floor = float(b.min(axis=1).sum())
    if target_alpha < floor - 1e-12:
        raise InfeasibleError(f"target {target_alpha!r} is below the minimum H0 cost {floor!r}")
    if method == "simplex":
        r, value, lam = _lp_simplex(a, b, target_alpha)
    elif method == "dual":
        r, value, lam = _lp_dual(a, b, target_alpha)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    r = np.clip(r, 0.0, None)
    r /= r.sum(axis=1, keepdims=True)
    c0 = float((b * r).sum())
    full = np.zeros((len(keep), a.shape[1]))
    full[keep] = r
    full[~keep, 0] = 1.0
    return LpSolution(float((a * r).sum()), full, choices, bool(abs(c0 - target_alpha) <= 1e-9),
                      c0, method, lam)


# --------------------------------------------------------------------------
# deterministic rules
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Frontier:
    points: np.ndarray
    hull: np.ndarray

    def value(self, c0: float) -> float:
        """Lower-left hull evaluated at ``c0`` (flat beyond its last vertex)."""
        xs, ys = self.hull[:, 0], self.hull[:, 1]
        if c0 < xs[0] - 1e-12:
            return float("inf")
        return float(np.interp(c0, xs, ys))


def _lower_left_hull(points: np.ndarray) -> np.ndarray:
    pts = np.unique(np.round(points, 15), axis=0)
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 1e-15:
                hull.pop()
            else:
                break
        hull.append(tuple(p))
    hull = np.array(hull)
    stop = int(np.argmin(hull[:, 1]))
    return hull[:stop + 1]


def deterministic_frontier(p, limit: int = 1_000_000) -> Frontier:
    """All deterministic rules' ``(c0, c1)`` and their lower-left convex hull."""
    a, b, choices = lp_coefficients(p)
    M, K = a.shape
    L_max = max(sum(1 for c in choices if c[0] == 0), sum(1 for c in choices if c[0] == 1))
    if (2 * L_max) ** M > limit or K ** M > limit:
        raise InstanceTooLargeError(f"{K}^{M} deterministic rules exceed the limit {limit}")
    idx = np.array(list(itertools.product(range(K), repeat=M)), dtype=int).reshape(-1, M)
    rows = np.arange(M)
    c0 = b[rows, idx].sum(axis=1)
    c1 = a[rows, idx].sum(axis=1)
    pts = np.stack([c0, c1], axis=1)
    return Frontier(pts, _lower_left_hull(pts))

"""Experiment configuration: YAML schema, validation and problem construction.

A config is a mapping with these top-level keys (``problem`` is required)::

    experiment: calibrate | decide | frontier | changepoint | criteria-demo
    seed: 0                  # nonnegative integer
    samples: 100000          # Monte Carlo budget
    alpha: 0.05              # target H0 cost, in (0, 1)
    output: out              # output directory
    points: [0.0, 1.0]       # sample points for decide / criteria-demo
    alpha_grid: [...]        # optional frontier grid
    problem: {...}

See README.md for the ``problem`` sections of each family.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from . import changepoint as cp
from .discrete_optimal import DiscreteProblem, alpha_min
from .errors import InvalidInputError
from .families import gaussian_fixed_family, gaussian_mean_family
from .model import (CostSpec, HypothesisSpec, Prior, Problem, absolute_error, constant_cost,
                    squared_error, truth_abs, truth_norm_squared, window_cost)

EXPERIMENTS = ("calibrate", "decide", "frontier", "changepoint", "criteria-demo")
FAMILIES = ("discrete_table", "gaussian_mean", "changepoint_iid")
SUM_TOL = 1e-9


class ConfigError(Exception):
    """Schema violation at ``path`` (a dotted key path)."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    experiment: str
    problem: Any                      # DiscreteProblem | Problem | ChangepointModel
    family: str
    seed: int = 0
    samples: int = 100_000
    alpha: Optional[float] = None
    output: str = "out"
    points: list = field(default_factory=list)
    alpha_grid: Optional[list] = None
    cost_name: str = "zero_one"
    map_delta: Optional[float] = None
    window: Optional[int] = None
    uniform: bool = False
    series: Optional[np.ndarray] = None
    base_dir: str = "."


# --------------------------------------------------------------------------
# reading
# --------------------------------------------------------------------------


def load_raw(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<root>", f"not valid YAML ({exc})") from None
    if data is None:
        raise ConfigError("<root>", "config is empty")
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    return data


def _req(d: dict, key: str, path: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return d[key]


def _number(v, path: str, lo=-math.inf, hi=math.inf, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if not lo <= v <= hi:
        raise ConfigError(path, f"value {v!r} outside [{lo}, {hi}]")
    return int(v) if integer else float(v)


def _array(v, path: str, ndim: int) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected numeric entries") from None
    if a.ndim != ndim:
        raise ConfigError(path, f"expected a {ndim}-dimensional array")
    return a


def _weights(v, path: str, n: int, what: str) -> np.ndarray:
    w = _array(v, path, 1)
    if len(w) != n:
        raise ConfigError(path, f"{what} has {len(w)} weights, expected {n}")
    if np.any(w < 0):
        raise ConfigError(path, f"{what} has a negative weight at index {int(np.argmax(w < 0))}")
    if abs(w.sum() - 1.0) > SUM_TOL:
        raise ConfigError(path, f"{what} sums to {w.sum():.17g}, not 1")
    return w / w.sum()


def _table(v, path: str, ncols: int = None) -> np.ndarray:
    t = _array(v, path, 2)
    if ncols is not None and t.shape[1] != ncols:
        raise ConfigError(path, f"table has {t.shape[1]} columns, expected {ncols}")
    if np.any(t < 0):
        r, c = np.argwhere(t < 0)[0]
        raise ConfigError(path, f"negative entry at (row {r}, column {c})")
    sums = t.sum(axis=1)
    bad = np.abs(sums - 1.0) > SUM_TOL
    if bad.any():
        r = int(np.argmax(bad))
        raise ConfigError(path, f"row {r} sums to {sums[r]:.17g}, not 1")
    return t / sums[:, None]


# --------------------------------------------------------------------------
# problem sections
# --------------------------------------------------------------------------


def _discrete(prob: dict, path: str):
    sides = []
    M = None
    for name in ("h0", "h1"):
        sec = _req(prob, name, path)
        t = _table(_req(sec, "table", f"{path}.{name}"), f"{path}.{name}.table", M)
        M = t.shape[1]
        if "prior" in sec:
            w = _weights(sec["prior"], f"{path}.{name}.prior", len(t), f"{name} prior")
        elif len(t) == 1:
            w = np.ones(1)
        else:
            raise ConfigError(f"{path}.{name}.prior", "missing required key")
        if np.any(w <= 0):
            raise ConfigError(f"{path}.{name}.prior", "weights must be strictly positive")
        sides.append((t, w))
    labels = prob.get("alphabet", list(range(M)))
    if not isinstance(labels, list) or len(labels) != M or len(set(map(str, labels))) != M:
        raise ConfigError(f"{path}.alphabet", f"expected {M} distinct labels")
    costs = prob.get("costs", "zero_one")
    if costs == "zero_one":
        return DiscreteProblem(tuple(labels), sides[0][0], sides[1][0], sides[0][1], sides[1][1]), "zero_one"
    if isinstance(costs, dict) and "tabulated" in costs:
        from .discrete_optimal import to_problem
        base = to_problem(DiscreteProblem(tuple(range(M)), sides[0][0], sides[1][0],
                                          sides[0][1], sides[1][1]))
        L = (len(sides[0][0]), len(sides[1][0]))
        fns = {}
        for j in (0, 1):
            for i in (0, 1):
                key = f"c{j}{i}"
                kpath = f"{path}.costs.tabulated.{key}"
                tab = _array(_req(costs["tabulated"], key, f"{path}.costs.tabulated"), kpath, 2)
                if tab.shape != (L[j], L[i]):
                    raise ConfigError(kpath, f"expected shape {(L[j], L[i])}, got {tab.shape}")
                if np.any(tab < 0):
                    raise ConfigError(kpath, "costs must be nonnegative")
                fns[key] = _tabulated_cost(tab)
        return Problem(base.h0, base.h1, CostSpec(**fns)), "tabulated"
    raise ConfigError(f"{path}.costs", "discrete_table supports 'zero_one' or {tabulated: ...}")


def _tabulated_cost(tab: np.ndarray):
    def cost(U, theta):
        u = np.rint(U[..., 0]).astype(int)
        t = np.rint(theta[..., 0]).astype(int)
        return tab[u, t]
    return cost


def _prior(sec, path: str, dim: int) -> Prior:
    kind = _req(sec, "kind", path)
    if kind == "point_masses":
        vals = _array(_req(sec, "values", path), f"{path}.values", 2 if dim > 1 else 1)
        n = len(vals)
        w = _weights(sec.get("weights", [1.0 / n] * n), f"{path}.weights", n, "prior")
        return Prior.point_masses(vals, w)
    if kind == "gaussian_grid":
        if dim != 1:
            raise ConfigError(path, "gaussian_grid is scalar only")
        sd = _number(sec.get("sd", 1.0), f"{path}.sd", lo=1e-300)
        lo = _number(sec.get("lower", -8.0), f"{path}.lower")
        hi = _number(sec.get("upper", 8.0), f"{path}.upper", lo=lo)
        n = _number(sec.get("nodes", 201), f"{path}.nodes", lo=2, integer=True)
        return Prior.gaussian_grid(_number(sec.get("mean", 0.0), f"{path}.mean"), sd, lo, hi, n)
    if kind == "uniform_box":
        lo = np.atleast_1d(_array(_req(sec, "lower", path), f"{path}.lower", 1 if dim > 1 else 0))
        hi = np.atleast_1d(_array(_req(sec, "upper", path), f"{path}.upper", 1 if dim > 1 else 0))
        if len(lo) != dim or len(hi) != dim or np.any(hi <= lo):
            raise ConfigError(path, f"need {dim} lower < upper bounds")
        n = _number(sec.get("nodes", 101), f"{path}.nodes", lo=2, integer=True)
        return Prior.uniform_grid(lo, hi, n)
    if kind == "tabulated":
        nodes = _array(_req(sec, "nodes", path), f"{path}.nodes", 1)
        w = _weights(_req(sec, "weights", path), f"{path}.weights", len(nodes), "prior")
        return Prior.quadrature(nodes, w)
    raise ConfigError(f"{path}.kind", f"unknown prior kind {kind!r}")


def _gaussian(prob: dict, path: str):
    dim = _number(prob.get("dim", 1), f"{path}.dim", lo=1, integer=True)
    sd = _number(prob.get("sd", 1.0), f"{path}.sd", lo=1e-300)
    h = []
    for name in ("h0", "h1"):
        sec = _req(prob, name, path)
        if "prior" in sec:
            h.append(HypothesisSpec(gaussian_mean_family(dim, sd),
                                    _prior(sec["prior"], f"{path}.{name}.prior", dim)))
        else:
            mean = sec.get("mean", 0.0)
            h.append(HypothesisSpec(gaussian_fixed_family(mean, dim, sd), Prior.simple()))
    costs = prob.get("costs", "squared_error")
    cpath = f"{path}.costs"
    delta = None
    if costs == "squared_error":
        c11, c01 = squared_error, truth_norm_squared
    elif costs == "absolute_error":
        c11, c01 = absolute_error, truth_abs
    elif isinstance(costs, dict) and "map_window" in costs:
        delta = _number(costs["map_window"], f"{cpath}.map_window", lo=1e-300)
        c11, c01 = window_cost(delta), constant_cost(1.0)
        costs = "map_window"
    elif costs == "zero_one":
        raise ConfigError(cpath, "zero_one costs need point-mass priors (use discrete_table)")
    else:
        raise ConfigError(cpath, f"unknown cost {costs!r}")
    if h[0].is_simple:
        spec = CostSpec.false_alarm(c11, c01)
    else:
        c10 = truth_norm_squared if costs == "squared_error" else (
            truth_abs if costs == "absolute_error" else constant_cost(1.0))
        spec = CostSpec(c11, c01, c10, c11)
    return Problem(h[0], h[1], spec), costs, delta


def _regime(sec, path: str):
    dist = _req(sec, "dist", path)
    if dist == "gaussian":
        mean = _number(sec.get("mean", 0.0), f"{path}.mean")
        sd = _number(sec.get("sd", 1.0), f"{path}.sd", lo=1e-300)
        c = math.log(sd) + 0.5 * math.log(2 * math.pi)
        return (lambda x: -0.5 * ((x - mean) / sd) ** 2 - c,
                lambda rng, shape: mean + sd * rng.standard_normal(shape))
    if dist == "bernoulli":
        p = _number(_req(sec, "p", path), f"{path}.p", lo=0.0, hi=1.0)

        def logpmf(x):
            with np.errstate(divide="ignore"):
                return np.where(x == 1, np.log(p), np.log1p(-p))
        return logpmf, lambda rng, shape: (rng.random(shape) < p).astype(float)
    raise ConfigError(f"{path}.dist", f"unknown distribution {dist!r}")


def _changepoint(prob: dict, path: str) -> cp.ChangepointModel:
    N = _number(_req(prob, "n_samples", path), f"{path}.n_samples", lo=1, integer=True)
    nom = _regime(_req(prob, "nominal", path), f"{path}.nominal")
    alt = _regime(_req(prob, "alternative", path), f"{path}.alternative")
    sec = prob.get("prior", {"kind": "uniform"})
    ppath = f"{path}.prior"
    kind = _req(sec, "kind", ppath)
    if kind == "uniform":
        w = cp.uniform_prior(N, _number(sec.get("no_change", 0.5), f"{ppath}.no_change", 0, 0.999999))
    elif kind == "geometric":
        w = cp.geometric_prior(N, _number(_req(sec, "rho", ppath), f"{ppath}.rho", 1e-12, 1 - 1e-12),
                               _number(sec.get("at_start", 0.0), f"{ppath}.at_start", 0, 0.999999))
    elif kind == "tabulated":
        w = _weights(_req(sec, "weights", ppath), f"{ppath}.weights", N + 1, "change-time prior")
    else:
        raise ConfigError(f"{ppath}.kind", f"unknown prior kind {kind!r}")
    return cp.iid_model(nom[0], alt[0], w, nom[1], alt[1])


def read_series(path: str) -> np.ndarray:
    """Single-column CSV of sample values (an optional non-numeric header is skipped)."""
    vals = []
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                vals.append(float(row[0]))
            except ValueError:
                if k == 0:
                    continue
                raise InvalidInputError(f"{path}: row {k + 1} is not a number") from None
    return np.array(vals)


# --------------------------------------------------------------------------
# top level
# --------------------------------------------------------------------------


def parse(raw: dict, base_dir: str = ".", overrides: dict = None) -> ExperimentConfig:
    """Validate a raw mapping and build the problem; raises :class:`ConfigError`."""
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    exp = raw.get("experiment", "calibrate")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {exp!r}; choose from {EXPERIMENTS}")
    prob = _req(raw, "problem", "")
    if not isinstance(prob, dict):
        raise ConfigError("problem", "must be a mapping")
    fam = _req(prob, "family", "problem")
    cfg = ExperimentConfig(exp, None, fam, base_dir=base_dir)
    cfg.seed = _number(raw.get("seed", 0), "seed", lo=0, hi=2 ** 64 - 1, integer=True)
    cfg.samples = _number(raw.get("samples", 100_000), "samples", lo=2, integer=True)
    if "alpha" in raw:
        cfg.alpha = _number(raw["alpha"], "alpha", lo=0.0, hi=1.0)
        if not 0.0 < cfg.alpha < 1.0:
            raise ConfigError("alpha", f"value {cfg.alpha!r} outside the open interval (0, 1)")
    cfg.output = str(raw.get("output", "out"))
    if "points" in raw:
        if not isinstance(raw["points"], list) or not raw["points"]:
            raise ConfigError("points", "expected a nonempty list")
        cfg.points = list(raw["points"])
    if "alpha_grid" in raw:
        grid = _array(raw["alpha_grid"], "alpha_grid", 1)
        if np.any(grid <= 0) or np.any(grid > 1):
            raise ConfigError("alpha_grid", "values must lie in (0, 1]")
        cfg.alpha_grid = grid.tolist()
    try:
        if fam == "discrete_table":
            cfg.problem, cfg.cost_name = _discrete(prob, "problem")
        elif fam == "gaussian_mean":
            cfg.problem, cfg.cost_name, cfg.map_delta = _gaussian(prob, "problem")
        elif fam == "changepoint_iid":
            cfg.problem = _changepoint(prob, "problem")
            cfg.cost_name = "changepoint"
            if "window" in prob:
                cfg.window = _number(prob["window"], "problem.window", lo=0, integer=True)
            stat = prob.get("statistic", "bayes")
            if stat not in ("bayes", "uniform"):
                raise ConfigError("problem.statistic", "expected 'bayes' or 'uniform'")
            cfg.uniform = stat == "uniform"
            if "series" in raw:
                spath = os.path.join(base_dir, str(raw["series"]))
                if not os.path.isfile(spath):
                    raise ConfigError("series", f"file not found: {spath}")
                cfg.series = read_series(spath)
                if len(cfg.series) != cfg.problem.n_samples:
                    raise ConfigError("series", f"series has {len(cfg.series)} values, "
                                      f"expected n_samples = {cfg.problem.n_samples}")
        else:
            raise ConfigError("problem.family", f"unknown family {fam!r}; choose from {FAMILIES}")
    except InvalidInputError as exc:
        raise ConfigError("problem", str(exc)) from None
    _check_experiment(cfg)
    return cfg


def _check_experiment(cfg: ExperimentConfig):
    needs_alpha = cfg.experiment in ("calibrate", "decide", "changepoint")
    if needs_alpha and cfg.alpha is None:
        raise ConfigError("alpha", f"experiment {cfg.experiment!r} needs a target alpha")
    if cfg.experiment == "frontier" and cfg.family != "discrete_table":
        raise ConfigError("experiment", "frontier needs a discrete_table problem")
    if cfg.experiment == "changepoint" and cfg.family != "changepoint_iid":
        raise ConfigError("experiment", "changepoint needs a changepoint_iid problem")
    if cfg.family == "changepoint_iid" and cfg.experiment not in ("changepoint",):
        raise ConfigError("experiment", "changepoint_iid problems run the changepoint experiment")
    if cfg.experiment == "criteria-demo" and cfg.family != "gaussian_mean":
        raise ConfigError("experiment", "criteria-demo needs a gaussian_mean problem")
    if cfg.experiment == "decide" and not cfg.points:
        raise ConfigError("points", "decide needs sample points")
    if cfg.family == "gaussian_mean" and cfg.experiment in ("calibrate", "decide"):
        if not cfg.problem.h0.is_simple:
            raise ConfigError("problem.h0", "Monte Carlo calibration needs a simple H0 (give 'mean')")


def lowest_alpha(cfg: ExperimentConfig) -> Optional[float]:
    """Smallest reachable H0 cost for finite problems, else ``None``."""
    if isinstance(cfg.problem, DiscreteProblem):
        return alpha_min(cfg.problem)
    if isinstance(cfg.problem, Problem) and cfg.problem.discrete:
        from .general_optimal import alpha_min_general
        return alpha_min_general(cfg.problem)
    return None


def validate(path: str, overrides: dict = None) -> list[str]:
    """Diagnostics for a config file; an empty list means it is valid."""
    try:
        raw = load_raw(path)
        cfg = parse(raw, os.path.dirname(os.path.abspath(path)), overrides)
    except ConfigError as exc:
        return [str(exc)]
    low = lowest_alpha(cfg)
    if low is not None and cfg.alpha is not None and cfg.alpha < low - 1e-12:
        return [f"alpha: target {cfg.alpha!r} is below alpha_min = {low:.17g}"]
    return []

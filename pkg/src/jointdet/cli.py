"""Command-line experiment runner.

``jointdet run --config PATH`` executes the configured experiment and writes
CSV tables plus ``report.txt`` into the output directory.
``jointdet validate --config PATH`` checks a config without running it.

Exit status: 0 success, 2 config/schema error, 3 target alpha unreachable,
4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import changepoint as cp
from . import criteria as cr
from . import discrete_optimal as do
from .calibrate import CalibrationResult, monte_carlo_evaluator, solve
from .config import ConfigError, ExperimentConfig, load_raw, lowest_alpha, parse, validate
from .errors import (InfeasibleError, NumericalDomainError, PreconditionViolation,
                     UndefinedEstimatorError, UndefinedStatisticError)
from .general_optimal import decoupled_evaluator, optimal_rule
from .model import Problem, average_cost, chunk_streams, sample_hypothesis
from .oracle import lp_optimal

EXIT_OK, EXIT_CONFIG, EXIT_UNREACHABLE, EXIT_NUMERIC = 0, 2, 3, 4


class Unreachable(Exception):
    def __init__(self, alpha, low, status):
        super().__init__(f"target alpha {alpha!r} is unreachable ({status}); alpha_min = {low:.17g}")
        self.low = low


@dataclass
class RunReport:
    experiment: str
    calibration: CalibrationResult = None
    lines: list = field(default_factory=list)
    files: list = field(default_factory=list)
    verdict: object = None
    wall_clock: float = 0.0

    def text(self) -> str:
        out = [f"experiment: {self.experiment}"]
        if self.calibration is not None:
            c = self.calibration
            out.append(f"calibration: lambda={fmt(c.lam)} gamma={fmt(c.gamma)} "
                       f"achieved_c0={fmt(c.achieved_c0)} se={fmt(c.standard_error)} "
                       f"status={c.status} iterations={c.iterations}")
            out.extend(f"note: {n}" for n in c.notes)
        out.extend(self.lines)
        out.extend(f"wrote: {os.path.basename(f)}" for f in self.files)
        return "\n".join(out) + "\n"


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (np.ndarray, list, tuple)):
        return " ".join(fmt(x) for x in np.asarray(v, dtype=float).ravel())
    return str(v)


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list, rows: list):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


CALIBRATION_HEADER = ["target_alpha", "lambda", "gamma", "achieved_c0", "standard_error",
                      "status", "iterations"]


def _calibration_row(alpha, res):
    return [alpha, res.lam, res.gamma, res.achieved_c0, res.standard_error, res.status,
            res.iterations]


# --------------------------------------------------------------------------
# calibration per problem type
# --------------------------------------------------------------------------


def _require(res: CalibrationResult, cfg: ExperimentConfig, low=None):
    if not res.reachable:
        low = lowest_alpha(cfg) if low is None else low
        raise Unreachable(cfg.alpha, res.achieved_c0 if low is None else low, res.status)
    return res


def _general_evaluator(p: Problem):
    try:
        return decoupled_evaluator(p)
    except PreconditionViolation:
        return lambda lam, gamma: average_cost(p, optimal_rule(p, lam, gamma), 0).value


def _continuous_kit(cfg: ExperimentConfig):
    """Vectorized statistic and estimator for a simple-H0 Gaussian problem."""
    p = cfg.problem
    if cfg.cost_name == "squared_error":
        return (lambda X: cr.mmse_ratio_batch(p, X),
                lambda X: np.atleast_2d(cr.mmse_estimator(p.h1, X)))
    if cfg.cost_name == "absolute_error":
        def stat(X):
            return np.array([np.divide(*cr.median_statistic(p, x)) for x in X])
        return stat, lambda X: np.array([[cr.median_estimator(p.h1, x)] for x in X])
    mc = cr.MapConfig.for_problem(p, cfg.map_delta)
    return (lambda X: np.array([cr.map_statistic(p, x, mc)[0] for x in X]),
            lambda X: np.array([cr.map_estimator(p.h1, x) for x in X]))


def _continuous_c1(cfg, stat, est, lam, gamma):
    """Monte Carlo H1 cost of the calibrated rule (joint draws, fixed seed stream)."""
    p = cfg.problem
    total, total_sq, n = 0.0, 0.0, 0
    for rng, size in chunk_streams(cfg.seed + 1, cfg.samples):
        theta, X = sample_hypothesis(p.h1, rng, size)
        s = stat(X)
        d1 = np.where(s > lam, 1.0, np.where(s == lam, gamma, 0.0))
        U = est(X)
        cost = (d1 * p.costs.c11(U, theta) + (1 - d1) * p.costs.c01(U[:, :0], theta))
        total += cost.sum()
        total_sq += (cost ** 2).sum()
        n += size
    mean = total / n
    return mean, float(np.sqrt(max(total_sq / n - mean ** 2, 0.0) / n))


def calibrate_config(cfg: ExperimentConfig, report: RunReport):
    p = cfg.problem
    if isinstance(p, do.DiscreteProblem):
        res = _require(do.calibrate(p, cfg.alpha), cfg)
        c0, c1 = do.error_probabilities(p, res.lam, res.gamma)
        report.lines.append(f"c0={fmt(c0)} c1={fmt(c1)}")
        return res, None
    if p.discrete:
        res = _require(solve(_general_evaluator(p), cfg.alpha), cfg)
        rule = optimal_rule(p, res.lam, res.gamma) if res.lam > 0 else None
        if rule is not None:
            report.lines.append(f"c1={fmt(average_cost(p, rule, 1).value)}")
        return res, None
    stat, est = _continuous_kit(cfg)
    ev = monte_carlo_evaluator(stat, lambda rng, size: sample_hypothesis(p.h0, rng, size)[1],
                               cfg.samples, cfg.seed)
    res = _require(solve(ev, cfg.alpha), cfg, low=0.0)
    c1, se = _continuous_c1(cfg, stat, est, res.lam, res.gamma)
    report.lines.append(f"c1={fmt(c1)} c1_se={fmt(se)}")
    return res, (stat, est)


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


def run_calibrate(cfg, report):
    res, _ = calibrate_config(cfg, report)
    report.calibration = res
    path = os.path.join(cfg.output, "calibration.csv")
    write_csv(path, CALIBRATION_HEADER, [_calibration_row(cfg.alpha, res)])
    report.files.append(path)


def _as_label(p: do.DiscreteProblem, x):
    for a in p.alphabet:
        if a == x or str(a) == str(x):
            return a
    raise ConfigError("points", f"{x!r} is not in the alphabet {list(p.alphabet)}")


def run_decide(cfg, report):
    res, kit = calibrate_config(cfg, report)
    report.calibration = res
    p = cfg.problem
    rows = []
    for x in cfg.points:
        if isinstance(p, do.DiscreteProblem):
            lab = _as_label(p, x)
            v = do.decide(p, lab, res.lam, res.gamma)
            est = v.estimate(1 if v.decision is None else v.decision)
            rows.append([lab, do.glr_statistic(p, lab), v.prob_h1, est])
        elif p.discrete:
            from .general_optimal import optimal_decide
            v = optimal_decide(p, x, res.lam, res.gamma)
            rows.append([x, np.nan, v.prob_h1, v.estimates[max(v.estimates)]])
        else:
            X = np.atleast_2d(np.asarray(x, dtype=float)).reshape(1, -1)
            s = float(kit[0](X)[0])
            prob = 1.0 if s > res.lam else (res.gamma if s == res.lam else 0.0)
            rows.append([x, s, prob, kit[1](X)[0] if prob > 0 else np.nan])
    path = os.path.join(cfg.output, "decisions.csv")
    write_csv(path, ["point", "statistic", "prob_h1", "estimate"], rows)
    report.files.append(path)
    for r in rows:
        report.lines.append(f"point={fmt(r[0])} statistic={fmt(r[1])} prob_h1={fmt(r[2])} "
                            f"estimate={fmt(r[3])}")
    path = os.path.join(cfg.output, "calibration.csv")
    write_csv(path, CALIBRATION_HEADER, [_calibration_row(cfg.alpha, res)])
    report.files.append(path)


def frontier_grid(low: float, grid=None) -> list:
    if grid is not None:
        return [float(a) for a in grid]
    return [low + (1.0 - low) * k / 20 for k in range(1, 21)]


def run_frontier(cfg, report):
    p = cfg.problem
    low = lowest_alpha(cfg)
    rows, cal_rows = [], []
    for alpha in frontier_grid(low, cfg.alpha_grid):
        if alpha < low - 1e-12:
            raise Unreachable(alpha, low, "unreachable_low")
        c1_lp = lp_optimal(p, alpha).optimal_c1
        if isinstance(p, do.DiscreteProblem):
            ev = do.c0_evaluator(p)
            if alpha >= ev.always_h1 - 1e-12:
                res = CalibrationResult(0.0, 1.0, ev(0.0, 1.0))
            else:
                res = solve(ev, alpha)
            c1 = do.error_probabilities(p, res.lam, res.gamma)[1]
            cev = do.c0_evaluator(p, classical=True)
            if alpha >= cev.always_h1 - 1e-12:
                c1_cl = do.error_probabilities(p, 0.0, 1.0, classical=True)[1]
            else:
                cres = solve(cev, alpha)
                c1_cl = (do.error_probabilities(p, cres.lam, cres.gamma, classical=True)[1]
                         if cres.reachable else np.nan)
        else:
            ev = _general_evaluator(p)
            res = solve(ev, alpha) if alpha < 1.0 else CalibrationResult(0.0, 1.0, 1.0)
            c1, c1_cl = c1_lp, np.nan
        if abs(c1 - c1_lp) > 1e-9:
            report.lines.append(f"warning: alpha={fmt(alpha)} rule c1 {fmt(c1)} != LP {fmt(c1_lp)}")
        rows.append([alpha, res.lam, res.gamma, c1, c1_cl])
        cal_rows.append(_calibration_row(alpha, res))
    path = os.path.join(cfg.output, "frontier.csv")
    write_csv(path, ["alpha", "lambda", "gamma", "c1_optimal", "c1_classical_glr"], rows)
    report.files.append(path)
    path = os.path.join(cfg.output, "calibration.csv")
    write_csv(path, CALIBRATION_HEADER, cal_rows)
    report.files.append(path)
    report.lines.append(f"alpha_min={fmt(low)} points={len(rows)}")


def run_changepoint(cfg, report):
    model = cfg.problem
    stat = lambda X: cp.batch_statistic(model, X, cfg.window, cfg.uniform)
    ev = monte_carlo_evaluator(stat, model.sample_nominal, cfg.samples, cfg.seed)
    res = _require(solve(ev, cfg.alpha), cfg, low=0.0)
    report.calibration = res
    series = cfg.series
    if series is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1 << 30,)))
        series = model.sample_nominal(rng, 1)[0]
        report.lines.append("series: generated from the nominal regime")
    v = cp.cp_decide(model, series, res.lam, res.gamma, cfg.window, cfg.uniform)
    report.lines.append(f"decision={v.decision if v.decision is not None else 'randomize'} "
                        f"statistic={fmt(v.statistic)} tau_hat={v.tau_hat}")
    path = os.path.join(cfg.output, "calibration.csv")
    write_csv(path, CALIBRATION_HEADER, [_calibration_row(cfg.alpha, res)])
    report.files.append(path)
    path = os.path.join(cfg.output, "changepoint.csv")
    write_csv(path, ["statistic", "decision", "prob_h1", "tau_hat"],
              [[v.statistic, "" if v.decision is None else v.decision,
                v.gamma if v.decision is None else float(v.decision),
                "" if v.tau_hat is None else v.tau_hat]])
    report.files.append(path)
    report.verdict = v


def run_criteria_demo(cfg, report):
    """Estimators and simplified statistics of all three criteria at each point."""
    p = cfg.problem
    points = cfg.points or [0.0, 1.0]
    scalar = p.h1.prior.param_dim == 1 and p.h1.prior.continuous and p.h0.is_simple
    mc = cr.MapConfig.for_problem(p, cfg.map_delta or 1e-3)
    rows = []
    for x in points:
        row = [x, cr.mmse_estimator(p.h1, x), cr.map_estimator(p.h1, x),
               cr.median_estimator(p.h1, x) if scalar else np.nan,
               cr.mmse_simplified_statistic(p, x), cr.map_statistic(p, x, mc)[0],
               cr.median_simplified_statistic(p, x) if scalar else np.nan]
        rows.append(row)
        report.lines.append(" ".join(fmt(v) for v in row))
    path = os.path.join(cfg.output, "criteria.csv")
    write_csv(path, ["point", "mmse_estimate", "map_estimate", "median_estimate",
                     "mmse_statistic", "map_statistic", "median_statistic"], rows)
    report.files.append(path)


RUNNERS = {"calibrate": run_calibrate, "decide": run_decide, "frontier": run_frontier,
           "changepoint": run_changepoint, "criteria-demo": run_criteria_demo}


def run(config_path: str, overrides: dict = None) -> RunReport:
    """Run the configured experiment; raises ConfigError / Unreachable / numerical errors."""
    start = time.perf_counter()
    raw = load_raw(config_path)
    cfg = parse(raw, os.path.dirname(os.path.abspath(config_path)), overrides)
    report = RunReport(cfg.experiment)
    RUNNERS[cfg.experiment](cfg, report)
    path = os.path.join(cfg.output, "report.txt")
    report.files.append(path)
    _atomic_write(path, report.text())
    report.wall_clock = time.perf_counter() - start
    return report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="jointdet", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("run", "validate"))
    ap.add_argument("--config", required=True)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--output")
    args = ap.parse_args(argv)
    overrides = {"seed": args.seed, "samples": args.samples, "alpha": args.alpha,
                 "output": args.output}
    try:
        if args.command == "validate":
            diags = validate(args.config, overrides)
            for d in diags:
                print(d)
            if not diags:
                print("ok")
                return EXIT_OK
            return EXIT_UNREACHABLE if "below alpha_min" in diags[0] else EXIT_CONFIG
        report = run(args.config, overrides)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Unreachable, InfeasibleError) as exc:
        print(f"unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except (NumericalDomainError, UndefinedStatisticError, UndefinedEstimatorError,
            FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(report.text())
    print(f"wall-clock: {report.wall_clock:.3f} s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

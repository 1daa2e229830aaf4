"""Monte Carlo threshold calibration on the scalar Gaussian MMSE problem.

For several sample budgets and seeds, calibrate the threshold to a target
false-alarm rate, then compare the exact false-alarm rate of the calibrated
threshold (available in closed form here) with the target.
"""

import argparse
import math
import time

import numpy as np
from scipy import optimize, stats

from jointdet import criteria as cr
from jointdet.calibrate import monte_carlo_evaluator, solve
from jointdet.instances import instance_g
from jointdet.model import sample_hypothesis


def exact_false_alarm(lam):
    # the statistic (x^2/4) exp(x^2/4) / sqrt(2) increases with |x|
    edge = optimize.brentq(lambda x: x * x / 4 * math.exp(x * x / 4) / math.sqrt(2) - lam,
                           1e-12, 12.0, xtol=1e-14)
    return 2 * stats.norm.sf(edge)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--budgets", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    g = instance_g()
    stat = lambda X: cr.mmse_ratio_batch(g, X)
    sampler = lambda rng, n: sample_hypothesis(g.h0, rng, n)[1]
    print(f"{'budget':>9} {'se':>9} {'mean |err|':>11} {'max |err|/se':>13} {'within 3 se':>11} "
          f"{'s/seed':>7}")
    for budget in args.budgets:
        se = math.sqrt(args.alpha * (1 - args.alpha) / budget)
        errs = []
        start = time.perf_counter()
        for seed in range(args.seeds):
            res = solve(monte_carlo_evaluator(stat, sampler, budget, seed), args.alpha)
            errs.append(abs(exact_false_alarm(res.lam) - args.alpha))
        per_seed = (time.perf_counter() - start) / args.seeds
        errs = np.array(errs)
        print(f"{budget:9d} {se:9.2g} {errs.mean():11.3g} {errs.max() / se:13.3g} "
              f"{int(np.sum(errs <= 3 * se)):>8d}/{args.seeds} {per_seed:7.2f}")


if __name__ == "__main__":
    main()

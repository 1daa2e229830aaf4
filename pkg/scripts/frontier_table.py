"""Optimal versus classical GLR error trade-off on the two built-in discrete instances.

Prints one row per target alpha and writes ``frontier_<name>.csv`` to the
output directory.  The LP column is the best H1 cost any rule can reach.
"""

import argparse
import os

from jointdet import discrete_optimal as do
from jointdet.calibrate import solve
from jointdet.cli import fmt, frontier_grid, write_csv
from jointdet.instances import instance_a, instance_b
from jointdet.oracle import lp_optimal


def classical_c1(p, alpha):
    ev = do.c0_evaluator(p, classical=True)
    if alpha >= ev.always_h1 - 1e-12:
        return do.error_probabilities(p, 0.0, 1.0, classical=True)[1]
    res = solve(ev, alpha)
    if not res.reachable:
        return float("nan")
    return do.error_probabilities(p, res.lam, res.gamma, classical=True)[1]


def table(p):
    rows = []
    for alpha in frontier_grid(do.alpha_min(p))[:-1]:
        res = do.calibrate(p, alpha)
        c1 = do.error_probabilities(p, res.lam, res.gamma)[1]
        rows.append([alpha, res.lam, res.gamma, c1, lp_optimal(p, alpha).optimal_c1,
                     classical_c1(p, alpha)])
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="out/scripts")
    args = ap.parse_args()
    header = ["alpha", "lambda", "gamma", "c1_optimal", "c1_lp", "c1_classical_glr"]
    for name, p in (("a", instance_a()), ("b", instance_b())):
        rows = table(p)
        print(f"instance {name} (alpha_min = {do.alpha_min(p):.4g})")
        print("  ".join(f"{h:>16}" for h in header))
        for r in rows:
            print("  ".join(f"{v:16.6g}" for v in r))
        path = os.path.join(args.output, f"frontier_{name}.csv")
        write_csv(path, header, rows)
        print(f"wrote {path}\n")


if __name__ == "__main__":
    main()

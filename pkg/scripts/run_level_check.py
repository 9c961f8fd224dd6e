"""Monte Carlo level and power of the bootstrap covariance test.

Two groups are drawn from a three-component location-scale law.  Under the
null both share it; under the alternative the second group's location
covariance is multiplied by ``--ratio``.

    python scripts/run_level_check.py --runs 200 --reps 200
"""

import argparse
import time

import numpy as np

from wasscov._grid import quantile_grid
from wasscov.inference import STATISTIC_KINDS, GroupedEnsembles, bootstrap_test
from wasscov.simulation import LocationScaleLaw, draw_ensemble

MU_COV = 0.5 * np.array([[1, 0.5, 0.2], [0.5, 1, 0.3], [0.2, 0.3, 1]])
SIGMA_COV = 0.01 * np.array([[1, 0.4, 0], [0.4, 1, 0.2], [0, 0.2, 1]])


def rejection_rate(law_a, law_b, n, runs, reps, statistic, grid, alpha, seed):
    rejected = 0
    for r in range(runs):
        rng = np.random.default_rng([seed, n, r])
        groups = GroupedEnsembles(("a", "b"), (draw_ensemble(law_a, n, rng, grid), draw_ensemble(law_b, n, rng, grid)))
        rejected += bootstrap_test(groups, statistic, reps, seed=r).p_value <= alpha
    return rejected / runs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=200)
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--n-null", type=int, default=100)
    parser.add_argument("--n-alt", type=int, default=200)
    parser.add_argument("--ratio", type=float, default=4.0)
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--statistic", choices=STATISTIC_KINDS, default="log_frobenius")
    parser.add_argument("--grid", type=int, default=201)
    parser.add_argument("--seed", type=int, default=8)
    args = parser.parse_args(argv)

    grid = quantile_grid(args.grid)
    null = LocationScaleLaw([0, 1, 2], MU_COV, [1, 1.5, 2], SIGMA_COV)
    alt = LocationScaleLaw([0, 1, 2], args.ratio * MU_COV, [1, 1.5, 2], SIGMA_COV)
    start = time.perf_counter()
    level = rejection_rate(null, null, args.n_null, args.runs, args.reps, args.statistic, grid, args.alpha, args.seed)
    se = np.sqrt(level * (1 - level) / args.runs)
    print(f"level  {level:.3f} (binomial se {se:.3f}), n = {args.n_null} per group")
    power = rejection_rate(null, alt, args.n_alt, args.runs, args.reps, args.statistic, grid, args.alpha, args.seed)
    print(f"power  {power:.3f}, n = {args.n_alt} per group, ratio {args.ratio:g}")
    print(f"{args.runs} runs x B = {args.reps}, {time.perf_counter() - start:.0f}s")


if __name__ == "__main__":
    main()

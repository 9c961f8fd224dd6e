"""Convergence-rate experiment for the covariance matrix or kernel estimator.

Reads a law spec in the ``simulate`` format and prints the rate table.

    python scripts/run_rate_experiment.py configs/rate_location_scale.txt
    python scripts/run_rate_experiment.py configs/kernel_brownian.txt --grid 200 --workers 4
"""

import argparse
import time

from wasscov._grid import quantile_grid
from wasscov.cli import law_from_spec
from wasscov.config import read_kv_file
from wasscov.simulation import rate_experiment


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("spec")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=int, default=1000)
    parser.add_argument("--replicates", type=int, help="override the spec")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)

    law, exp = law_from_spec(read_kv_file(args.spec))
    reps = args.replicates or exp["replicates"]
    start = time.perf_counter()
    table = rate_experiment(law, exp["n_list"], exp["N_list"], reps, args.seed, exp["kind"],
                            quantile_grid(args.grid), workers=args.workers)
    print(f"{'n':>6} {'N':>6} {'mean_error':>12} {'se_error':>12}")
    for r in table.rows:
        print(f"{r.n:>6} {'exact' if r.N is None else r.N:>6} {r.mean_error:12.4e} {r.se_error:12.4e}")
    print(f"log-log slope {table.slope:.3f}  ({exp['kind']}, {reps} replicates, {time.perf_counter() - start:.0f}s)")
    if exp["kind"] == "kernel" and len(table.rows) >= 2:
        print(f"error ratio first/last n: {table.rows[0].mean_error / table.rows[-1].mean_error:.1f}")


if __name__ == "__main__":
    main()

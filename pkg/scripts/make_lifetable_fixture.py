"""Write a small synthetic life-table fixture in the histogram input format.

Each unit is a country-like population and each index a calendar year.  Deaths
per single-year age bin on [20, 110) follow a Gompertz hazard whose parameters
drift smoothly over the years, with multinomial noise.

    python scripts/make_lifetable_fixture.py --out data/synthetic_lifetables.csv

A two-group membership file is written next to it for the ``test`` command.
"""

import argparse
from pathlib import Path

import numpy as np

from wasscov.io import HIST_HEADER


def gompertz_deaths(ages, a, b, radix):
    """Expected deaths per age bin for survivors starting at ``ages[0]``."""
    x = ages - ages[0]
    cum_hazard = a / b * (np.exp(b * x) - 1.0)
    survivors = radix * np.exp(-cum_hazard)
    survivors[-1] = 0.0  # close the table at the upper age
    return -np.diff(survivors)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("data/synthetic_lifetables.csv"))
    parser.add_argument("--units", type=int, default=6)
    parser.add_argument("--years", type=int, default=4)
    parser.add_argument("--seed", type=int, default=20)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    ages = np.arange(20.0, 111.0)
    lines = [",".join(HIST_HEADER)]
    for u in range(args.units):
        a0 = 10 ** rng.uniform(-3.6, -3.2)
        b0 = rng.uniform(0.08, 0.10)
        for y in range(args.years):
            # mortality improves a little each year
            p = gompertz_deaths(ages, a0 * 0.97 ** y, b0, 1.0)
            deaths = rng.multinomial(20_000, p / p.sum())
            for lo, hi, d in zip(ages[:-1], ages[1:], deaths):
                lines.append(f"unit{u},{2000 + y},{lo:g},{hi:g},{d}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text("\n".join(lines) + "\n")
    groups = args.out.with_name(args.out.stem + "_groups.csv")
    half = args.units // 2
    groups.write_text("subject_id,group\n" + "".join(f"unit{u},{'AB'[u >= half]}\n" for u in range(args.units)))
    print(f"wrote {args.out} ({args.units} units x {args.years} years) and {groups}")


if __name__ == "__main__":
    main()

"""Command-line front end.

    wasscov estimate --input samples.csv --out-dir out/
    wasscov cov      --input out/quantiles.csv --out-dir out/
    wasscov test     --input samples.csv --groups groups.csv --reps 1000 --seed 1
    wasscov simulate --input law.txt --out-dir out/

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, UsageError, parse_bandwidth, read_kv_file
from .density import (
    Support,
    cdf_to_quantile,
    density_to_cdf,
    estimate_quantile,
    histogram_bandwidth,
    histogram_to_density,
    parallel_map,
    quantile_to_cdf,
)
from ._grid import quantile_grid
from .errors import DataError, NumericalError
from .estimation import (
    QuantileEnsemble,
    cov_to_corr,
    wasserstein_cov_kernel,
    wasserstein_cov_matrix,
    wasserstein_mean,
)
from .inference import STATISTIC_KINDS, GroupedEnsembles, bootstrap_test
from .simulation import LocationScaleLaw, brownian_location_law, centered_truncnorm, centered_uniform, rate_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wasscov", description="Wasserstein covariance for vectors of random densities.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "estimate": "smooth raw samples or histograms into quantile functions",
        "cov": "Wasserstein means, covariance/correlation matrices and surfaces",
        "test": "bootstrap test for equal Wasserstein covariance across groups",
        "simulate": "convergence-rate experiment on a location-scale law",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--input", required=True, type=Path,
                       help="law spec file" if name == "simulate" else "raw, histogram or quantile CSV")
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--out-dir", type=Path, default=Path("."))
        p.add_argument("--seed", type=int)
        p.add_argument("--grid", type=int, help="quantile grid size M")
        p.add_argument("--bandwidth", help="'auto' or a positive number")
        p.add_argument("--workers", type=int, help="threads (results do not depend on it)")
        if name == "test":
            p.add_argument("--groups", type=Path, required=True, help="CSV with subject_id,group")
            p.add_argument("--reps", type=int, help="bootstrap replicates B")
            p.add_argument("--statistic", choices=STATISTIC_KINDS)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        cfg.update(read_kv_file(args.config))
    flags = {
        "seed": args.seed,
        "grid": args.grid,
        "reps": getattr(args, "reps", None),
        "statistic": getattr(args, "statistic", None),
        "workers": args.workers,
    }
    cfg.update({k: str(v) for k, v in flags.items() if v is not None})
    if args.bandwidth is not None:
        cfg.bandwidth = parse_bandwidth(args.bandwidth)
    return cfg


def _source(path: Path) -> dict:
    return {"file": path.name, "sha256": hashlib.sha256(path.read_bytes()).hexdigest()}


# ---------------------------------------------------------------------------
# ingestion


@dataclass
class Cells:
    subjects: list
    components: list
    tgrid: np.ndarray
    data: np.ndarray  # (n, p, M)

    def ensemble(self, cfg: RunConfig, rows=None) -> QuantileEnsemble:
        data = self.data if rows is None else self.data[rows]
        y = time_index(self.components) if cfg.time_index else None
        return QuantileEnsemble(data, self.tgrid, self.components, y)


def time_index(components) -> np.ndarray:
    try:
        c = np.array([float(x) for x in components])
    except ValueError:
        raise DataError("time_index requires numeric component ids") from None
    if c.size < 2 or np.any(np.diff(c) <= 0):
        raise DataError("time_index requires at least two distinct component ids")
    return (c - c[0]) / (c[-1] - c[0])


def _raw_supports(table: io.CellTable, cfg: RunConfig, path) -> dict:
    supports = {}
    for c in table.components:
        declared = cfg.support_for(c)
        if declared is None:
            values = [v for s in table.subjects for v, _ in table.cells[(s, c)]]
            declared = (min(values), max(values))
            if declared[0] == declared[1]:
                raise DataError(f"component {c!r}: all values equal; declare a support for it")
        support = Support(*declared)
        for s in table.subjects:
            for v, lineno in table.cells[(s, c)]:
                if not support.lower <= v <= support.upper:
                    raise DataError(
                        f"{path}:{lineno}: value {v!r} for subject {s!r}, component {c!r} "
                        f"is outside the support [{support.lower}, {support.upper}]"
                    )
        supports[c] = support
    return supports


def load_cells(path: Path, cfg: RunConfig) -> Cells:
    """Read any supported input and return quantile functions for every cell."""
    kind = io.sniff(path)
    if kind == "quantile":
        qt = io.read_quantiles(path)
        if qt.tgrid.size < 3 or qt.tgrid[0] != 0.0 or qt.tgrid[-1] != 1.0:
            raise DataError(f"{path}: quantile grid must span [0, 1]")
        return Cells(qt.subjects, qt.components, qt.tgrid, qt.data)

    tgrid = quantile_grid(cfg.grid)
    if kind == "raw":
        table = io.read_raw_samples(path)
        supports = _raw_supports(table, cfg, path)

        def one(key):
            s, c = key
            values = np.array([v for v, _ in table.cells[key]])
            return estimate_quantile(values, supports[c], cfg.bandwidth, cfg.density_grid, tgrid).values
    else:
        table = io.read_histograms(path)

        def one(key):
            s, c = key
            edges, counts = io.histogram_cell(table.cells[key], path, s, c)
            if counts.sum() <= 0:
                raise DataError(f"{path}: unit {s!r}, index {c!r} has zero total count")
            h = histogram_bandwidth(edges, counts) if cfg.bandwidth is None else cfg.bandwidth
            f = histogram_to_density(edges, counts, h, cfg.density_grid)
            return cdf_to_quantile(density_to_cdf(f), tgrid).values

    keys = [(s, c) for s in table.subjects for c in table.components]
    values = parallel_map(one, keys, cfg.workers)
    data = np.array(values).reshape(len(table.subjects), len(table.components), tgrid.size)
    return Cells(table.subjects, table.components, tgrid, data)


# ---------------------------------------------------------------------------
# commands


def _comments(command: str, cfg: RunConfig, source: dict) -> dict:
    return {"wasscov": command, "config": cfg.to_dict(), "source": source}


def cmd_estimate(args, cfg: RunConfig) -> int:
    cells = load_cells(args.input, cfg)
    keys = [(s, c) for s in cells.subjects for c in cells.components]
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "quantiles.csv"
    io.write_quantiles(out, keys, cells.tgrid, cells.data.reshape(len(keys), -1),
                       _comments("estimate", cfg, _source(args.input)))
    print(f"wrote {len(keys)} quantile functions to {out}")
    return EXIT_OK


def cmd_cov(args, cfg: RunConfig) -> int:
    cells = load_cells(args.input, cfg)
    ens = cells.ensemble(cfg)
    comments = _comments("cov", cfg, _source(args.input))
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    M = ens.tgrid.size

    S = wasserstein_cov_matrix(ens)
    io.write_matrix_csv(out / "cov_matrix.csv", S.labels, S.values, comments)
    io.write_json(out / "cov_matrix.json", io.matrix_document(S.labels, S.values, ens.n, M, ens.time_index, comments))
    try:
        R = cov_to_corr(S)
    except NumericalError as exc:
        print(f"warning: correlation matrix skipped: {exc}", file=sys.stderr)
    else:
        io.write_matrix_csv(out / "corr_matrix.csv", R.labels, R.values, comments)
        io.write_json(out / "corr_matrix.json", io.matrix_document(R.labels, R.values, ens.n, M, ens.time_index, comments))

    means = [wasserstein_mean(ens, j) for j in range(ens.p)]
    io.write_quantiles(out / "mean_quantiles.csv", [("mean", c) for c in ens.labels], ens.tgrid,
                       [q.values for q in means], comments)
    rows = []
    for label, q in zip(ens.labels, means):
        if q.values[-1] <= q.values[0]:
            print(f"warning: mean of component {label!r} is a point mass; no density written", file=sys.stderr)
            continue
        F = quantile_to_cdf(q, cfg.density_grid)
        dens = np.gradient(F.values, F.grid)
        rows.extend([label, u, d] for u, d in zip(F.grid, dens))
    io.write_table_csv(out / "mean_densities.csv", ["component_id", "u", "density"], rows, comments)

    if ens.time_index is not None:
        surface = wasserstein_cov_kernel(ens)
        g = np.linspace(0.0, 1.0, cfg.surface_grid)
        values = surface.on_grid(g)
        grid_labels = [io.fmt(y) for y in g]
        io.write_matrix_csv(out / "surface.csv", grid_labels, values, comments)
        doc = io.matrix_document(grid_labels, values, ens.n, M, ens.time_index, comments)
        doc["grid"] = [float(y) for y in g]
        io.write_json(out / "surface.json", doc)
    print(f"wrote Wasserstein covariance outputs for n={ens.n}, p={ens.p} to {out}")
    return EXIT_OK


def cmd_test(args, cfg: RunConfig) -> int:
    membership = io.read_groups(args.groups)
    cells = load_cells(args.input, cfg)
    unassigned = [s for s in cells.subjects if s not in membership]
    if unassigned:
        raise DataError(f"subjects without a group: {', '.join(unassigned)}")
    absent = [s for s in membership if s not in cells.subjects]
    if absent:
        raise DataError(f"grouped subjects missing from the input: {', '.join(absent)}")
    labels = list(dict.fromkeys(membership.values()))
    if len(labels) < 2:
        raise DataError("need at least two groups")
    index = {s: i for i, s in enumerate(cells.subjects)}
    ensembles = []
    for g in labels:
        rows = [index[s] for s, grp in membership.items() if grp == g]
        if len(rows) < 2:
            raise DataError(f"group {g!r} has {len(rows)} subject(s); at least 2 are required")
        ensembles.append(cells.ensemble(cfg, rows))
    result = bootstrap_test(GroupedEnsembles(labels, ensembles), cfg.statistic, cfg.reps, cfg.seed, cfg.workers)
    doc = result.to_dict()
    doc.update(_comments("test", cfg, {"input": _source(args.input), "groups": _source(args.groups)}))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    io.write_json(args.out_dir / "test_result.json", doc)
    print(f"statistic={result.statistic!r} p_value={result.p_value!r} B={result.replicates}")
    return EXIT_OK


def _floats(key: str, value: str) -> list[float]:
    try:
        return [float(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{key} must be a comma-separated list of numbers, got {value!r}") from None


def _matrix(key: str, value: str) -> np.ndarray:
    rows = [_floats(key, r) for r in value.split(";") if r.strip()]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise UsageError(f"{key} must be rows of equal length separated by ';'")
    return np.array(rows)


def law_from_spec(spec: dict[str, str]) -> tuple[LocationScaleLaw, dict]:
    """Build the law and experiment settings from a simulate spec mapping."""
    spec = dict(spec)
    bases = {"uniform": centered_uniform, "truncnorm": centered_truncnorm(2.0)}
    base_name = spec.pop("base", "uniform")
    if base_name not in bases:
        raise UsageError(f"base must be one of {', '.join(bases)}, got {base_name!r}")
    kind = spec.pop("law", "location_scale")
    try:
        if kind == "brownian":
            p = int(spec.pop("p"))
            law = brownian_location_law(p, float(spec.pop("scale", "1")), float(spec.pop("sigma", "1")), bases[base_name])
        elif kind == "location_scale":
            law = LocationScaleLaw(
                mu_mean=_floats("mu_mean", spec.pop("mu_mean")),
                mu_cov=_matrix("mu_cov", spec.pop("mu_cov")),
                sigma_mean=_floats("sigma_mean", spec.pop("sigma_mean")),
                sigma_cov=_matrix("sigma_cov", spec.pop("sigma_cov")),
                base=bases[base_name],
            )
        else:
            raise UsageError(f"law must be location_scale or brownian, got {kind!r}")
        experiment = {
            "n_list": [int(x) for x in _floats("n_list", spec.pop("n_list"))],
            "N_list": [None if x.strip() == "exact" else int(x) for x in spec.pop("N_list", "exact").split(",")],
            "replicates": int(spec.pop("replicates", "100")),
            "kind": spec.pop("kind", "kernel" if kind == "brownian" else "matrix"),
        }
    except KeyError as exc:
        raise UsageError(f"law spec is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise UsageError(f"invalid law spec: {exc}") from None
    if spec:
        raise UsageError(f"unknown law spec key(s): {', '.join(sorted(spec))}")
    return law, experiment


def cmd_simulate(args, cfg: RunConfig) -> int:
    spec = read_kv_file(args.input)
    law, exp = law_from_spec(spec)
    table = rate_experiment(law, exp["n_list"], exp["N_list"], exp["replicates"], cfg.seed, exp["kind"],
                            quantile_grid(cfg.grid), cfg.bandwidth, cfg.density_grid, cfg.workers)
    rows = [[str(r.n), "exact" if r.N is None else str(r.N), str(r.replicate_count), r.mean_error, r.se_error, ""]
            for r in table.rows]
    rows.append(["slope", "", "", "", "", table.slope])
    args.out_dir.mkdir(parents=True, exist_ok=True)
    comments = _comments("simulate", cfg, _source(args.input))
    comments["law_spec"] = spec
    io.write_table_csv(args.out_dir / "rates.csv", ["n", "N", "replicate_count", "mean_error", "se_error", "slope"],
                       rows, comments)
    print(f"slope={table.slope!r}")
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "cov": cmd_cov, "test": cmd_test, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if not args.input.exists():
            raise UsageError(f"input file not found: {args.input}")
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"wasscov: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"wasscov: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"wasscov: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

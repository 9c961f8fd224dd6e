import csv
import json
from pathlib import Path

import numpy as np
import pytest

from wasscov import io
from wasscov._grid import quantile_grid
from wasscov.cli import main
from wasscov.config import RunConfig, UsageError, parse_kv
from wasscov.errors import DataError

FIXTURE = Path(__file__).resolve().parents[1] / "data" / "synthetic_lifetables.csv"


def write_raw(path, cells, rng=None, N=200):
    """``cells`` maps (subject, component) to (loc, scale) of a Beta(2, 2) sample."""
    rng = rng or np.random.default_rng(0)
    lines = ["subject_id,component_id,value"]
    for (s, c), (loc, scale) in cells.items():
        for v in loc + scale * rng.beta(2, 2, N):
            lines.append(f"{s},{c},{float(v)!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def raw_cells(n, p, rng):
    return {(f"s{i}", f"{j}"): (rng.normal(scale=0.2), np.exp(rng.normal(scale=0.2))) for i in range(n) for j in range(p)}


def read_matrix(path):
    rows = [r for r in csv.reader(l for l in path.read_text().splitlines() if not l.startswith("#"))]
    return rows[0][1:], np.array([[float(x) for x in r[1:]] for r in rows[1:]])


def outputs(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir())}


@pytest.fixture
def raw_file(tmp_path):
    return write_raw(tmp_path / "raw.csv", raw_cells(6, 3, np.random.default_rng(1)))


@pytest.fixture
def hand_quantiles(tmp_path):
    t = quantile_grid(1000)
    path = tmp_path / "hand.csv"
    io.write_quantiles(path, [("s1", "a"), ("s1", "b"), ("s2", "a"), ("s2", "b")], t, [t, t, 1 + t, 1 + t])
    return path


# ---------------------------------------------------------------------------
# readers


def test_sniff(raw_file, hand_quantiles, tmp_path):
    assert io.sniff(raw_file) == "raw"
    assert io.sniff(FIXTURE) == "histogram"
    assert io.sniff(hand_quantiles) == "quantile"
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        io.sniff(bad)


def test_missing_cells_are_listed(tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("subject_id,component_id,value\ns1,a,1\ns1,b,2\ns2,a,3\ns3,c,1\n")
    with pytest.raises(DataError) as err:
        io.read_raw_samples(path)
    message = str(err.value)
    for cell in ["(s1, c)", "(s2, b)", "(s2, c)", "(s3, a)", "(s3, b)"]:
        assert cell in message


def test_non_numeric_value_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# comment\nsubject_id,component_id,value\ns1,a,1.0\ns1,a,oops\n")
    with pytest.raises(DataError, match=r"bad.csv:4"):
        io.read_raw_samples(path)


def test_comments_and_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("# header note\nsubject_id,component_id,value\n\ns1,a,1\n# mid\ns1,a,2\n")
    table = io.read_raw_samples(path)
    assert [v for v, _ in table.cells[("s1", "a")]] == [1.0, 2.0]


def test_numeric_components_in_natural_order(tmp_path):
    path = tmp_path / "n.csv"
    path.write_text("subject_id,component_id,value\ns1,10,1\ns1,2,1\ns2,10,1\ns2,2,1\n")
    assert io.read_raw_samples(path).components == ["2", "10"]


def test_histogram_gap_is_rejected(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("unit_id,index,bin_lower,bin_upper,count\nu,1,0,1,3\nu,1,2,3,4\n")
    table = io.read_histograms(path)
    with pytest.raises(DataError, match="not contiguous"):
        io.histogram_cell(table.cells[("u", "1")], path, "u", "1")


def test_decreasing_quantile_row_is_rejected(tmp_path):
    path = tmp_path / "q.csv"
    path.write_text("subject_id,component_id,0.0,0.5,1.0\ns1,a,0,2,1\n")
    with pytest.raises(DataError, match="q.csv:2"):
        io.read_quantiles(path)


def test_quantile_file_round_trip(hand_quantiles):
    table = io.read_quantiles(hand_quantiles)
    t = quantile_grid(1000)
    assert np.array_equal(table.tgrid, t)
    assert np.array_equal(table.data[1, 0], 1 + t)


def test_groups_reject_duplicates(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("subject_id,group\ns1,a\ns1,b\n")
    with pytest.raises(DataError, match="twice"):
        io.read_groups(path)


# ---------------------------------------------------------------------------
# configuration


def test_parse_kv():
    assert parse_kv("a = 1  # note\n\nb=x, y\n") == {"a": "1", "b": "x, y"}
    with pytest.raises(UsageError):
        parse_kv("novalue\n")
    with pytest.raises(UsageError):
        parse_kv("a=1\na=2\n")


def test_run_config_update():
    cfg = RunConfig().update({"grid": "201", "bandwidth": "auto", "support.b": "0, 2", "support": "-1,1"})
    assert cfg.grid == 201 and cfg.bandwidth is None
    assert cfg.support_for("b") == (0.0, 2.0) and cfg.support_for("a") == (-1.0, 1.0)
    for bad in [{"grid": "2"}, {"reps": "0"}, {"bandwidth": "-1"}, {"statistic": "trace"}, {"colour": "red"}]:
        with pytest.raises(UsageError):
            RunConfig().update(bad)


def test_flags_override_config_file(tmp_path, raw_file, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("grid = 50\nbandwidth = 0.05\n")
    assert main(["estimate", "--input", str(raw_file), "--config", str(conf), "--grid", "21",
                 "--out-dir", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "quantiles.csv").read_text()
    config = json.loads(text.splitlines()[1].split(": ", 1)[1])
    assert config["grid"] == 21 and config["bandwidth"] == 0.05


# ---------------------------------------------------------------------------
# estimate


def test_estimate_two_by_two(tmp_path):
    raw = write_raw(tmp_path / "r.csv", raw_cells(2, 2, np.random.default_rng(2)))
    assert main(["estimate", "--input", str(raw), "--out-dir", str(tmp_path)]) == 0
    table = io.read_quantiles(tmp_path / "quantiles.csv")
    assert table.data.shape == (2, 2, 1000)
    assert table.subjects == ["s0", "s1"] and table.components == ["0", "1"]


def test_estimate_outside_declared_support(tmp_path, capsys):
    raw = tmp_path / "r.csv"
    raw.write_text("subject_id,component_id,value\ns1,a,0.2\ns1,a,0.4\ns2,a,1.7\ns2,a,0.5\n")
    conf = tmp_path / "c.conf"
    conf.write_text("support = 0, 1\n")
    code = main(["estimate", "--input", str(raw), "--config", str(conf), "--out-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 2
    assert "r.csv:4" in err and "'s2'" in err and "'a'" in err


def test_estimate_is_byte_identical_and_worker_independent(tmp_path, raw_file):
    runs = {}
    for name, workers in [("a", "1"), ("b", "1"), ("c", "4")]:
        assert main(["estimate", "--input", str(raw_file), "--out-dir", str(tmp_path / name), "--workers", workers]) == 0
        runs[name] = outputs(tmp_path / name)
    assert runs["a"] == runs["b"] == runs["c"]


def test_estimate_histogram_fixture(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("bandwidth = 2\ngrid = 101\n")
    assert main(["estimate", "--input", str(FIXTURE), "--config", str(conf), "--out-dir", str(tmp_path)]) == 0
    table = io.read_quantiles(tmp_path / "quantiles.csv")
    assert np.all(table.data[..., 0] == 20.0) and np.all(table.data[..., -1] == 110.0)


# ---------------------------------------------------------------------------
# cov


def test_cov_hand_example(tmp_path, hand_quantiles):
    assert main(["cov", "--input", str(hand_quantiles), "--out-dir", str(tmp_path)]) == 0
    labels, values = read_matrix(tmp_path / "cov_matrix.csv")
    assert labels == ["a", "b"]
    assert np.allclose(values, 0.25, atol=1e-12)
    doc = json.loads((tmp_path / "cov_matrix.json").read_text())
    assert doc["n"] == 2 and doc["M"] == 1000 and np.allclose(doc["values"], 0.25, atol=1e-12)
    assert np.allclose(read_matrix(tmp_path / "corr_matrix.csv")[1], 1.0)
    means = io.read_quantiles(tmp_path / "mean_quantiles.csv")
    assert np.allclose(means.data[0, 0], 0.5 + means.tgrid)


def test_cov_single_component_is_frechet_variance(tmp_path):
    t = quantile_grid(1000)
    path = tmp_path / "q.csv"
    io.write_quantiles(path, [("s1", "x"), ("s2", "x"), ("s3", "x")], t, [t, 1 + t, 3 * t])
    assert main(["cov", "--input", str(path), "--out-dir", str(tmp_path)]) == 0
    _, values = read_matrix(tmp_path / "cov_matrix.csv")
    data = np.stack([t, 1 + t, 3 * t])
    frechet = np.mean(np.trapezoid((data - data.mean(axis=0)) ** 2, t, axis=1))
    assert values.shape == (1, 1) and values[0, 0] == pytest.approx(frechet, abs=1e-12)


def test_cov_mean_densities_integrate_to_one(tmp_path, raw_file):
    assert main(["cov", "--input", str(raw_file), "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.reader(l for l in (tmp_path / "mean_densities.csv").read_text().splitlines() if not l.startswith("#")))
    data = np.array([[float(x) for x in r[1:]] for r in rows[1:] if r[0] == "0"])
    assert np.trapezoid(data[:, 1], data[:, 0]) == pytest.approx(1.0, abs=1e-2)


def test_cov_surface_matches_matrix_at_nodes(tmp_path):
    raw = write_raw(tmp_path / "r.csv", raw_cells(8, 5, np.random.default_rng(3)))
    conf = tmp_path / "c.conf"
    conf.write_text("time_index = true\nsurface_grid = 9\ngrid = 101\n")
    assert main(["cov", "--input", str(raw), "--config", str(conf), "--out-dir", str(tmp_path)]) == 0
    _, S = read_matrix(tmp_path / "cov_matrix.csv")
    _, surf = read_matrix(tmp_path / "surface.csv")
    assert np.array_equal(surf[::2, ::2], S)
    doc = json.loads((tmp_path / "surface.json").read_text())
    assert doc["time_index"] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_cov_needs_two_subjects(tmp_path):
    t = quantile_grid(10)
    path = tmp_path / "q.csv"
    io.write_quantiles(path, [("s1", "x")], t, [t])
    assert main(["cov", "--input", str(path), "--out-dir", str(tmp_path)]) == 2


def test_cov_is_byte_identical(tmp_path, raw_file):
    for name, workers in [("a", "1"), ("b", "3")]:
        assert main(["cov", "--input", str(raw_file), "--out-dir", str(tmp_path / name), "--workers", workers]) == 0
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b")


# ---------------------------------------------------------------------------
# test


def write_groups(path, assignment):
    path.write_text("subject_id,group\n" + "".join(f"{s},{g}\n" for s, g in assignment.items()))
    return path


def test_duplicated_group_gives_p_value_one(tmp_path):
    # the same samples written under two sets of subject ids
    rng = np.random.default_rng(4)
    lines = ["subject_id,component_id,value"]
    for (s, c), (loc, scale) in raw_cells(5, 2, rng).items():
        draws = loc + scale * rng.beta(2, 2, 100)
        for prefix in ("s", "d"):
            lines += [f"{prefix}{s[1:]},{c},{float(v)!r}" for v in draws]
    raw = tmp_path / "r.csv"
    raw.write_text("\n".join(lines) + "\n")
    conf = tmp_path / "c.conf"
    conf.write_text("support = -3, 5\n")
    groups = write_groups(tmp_path / "g.csv", {**{f"s{i}": "A" for i in range(5)}, **{f"d{i}": "B" for i in range(5)}})
    code = main(["test", "--input", str(raw), "--groups", str(groups), "--config", str(conf), "--reps", "20",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    result = json.loads((tmp_path / "test_result.json").read_text())
    assert result["statistic"] == 0.0 and result["p_value"] == 1.0


def test_test_command_reproducible(tmp_path, raw_file):
    groups = write_groups(tmp_path / "g.csv", {f"s{i}": "AB"[i % 2] for i in range(6)})
    for name, workers in [("a", "1"), ("b", "1"), ("c", "4")]:
        code = main(["test", "--input", str(raw_file), "--groups", str(groups), "--reps", "25", "--seed", "7",
                     "--statistic", "sqrt_distance", "--workers", workers, "--out-dir", str(tmp_path / name)])
        assert code == 0
    a, b, c = (outputs(tmp_path / n) for n in "abc")
    assert a == b == c
    result = json.loads(a["test_result.json"])
    assert result["B"] == 25 and result["seed"] == 7 and result["statistic_kind"] == "sqrt_distance"
    assert result["config"]["reps"] == 25


def test_test_command_small_group(tmp_path, raw_file, capsys):
    groups = write_groups(tmp_path / "g.csv", {"s0": "A", **{f"s{i}": "B" for i in range(1, 6)}})
    assert main(["test", "--input", str(raw_file), "--groups", str(groups), "--out-dir", str(tmp_path)]) == 2
    assert "group 'A'" in capsys.readouterr().err


def test_test_command_unassigned_subject(tmp_path, raw_file):
    groups = write_groups(tmp_path / "g.csv", {f"s{i}": "AB"[i % 2] for i in range(5)})
    assert main(["test", "--input", str(raw_file), "--groups", str(groups), "--out-dir", str(tmp_path)]) == 2


def test_test_command_degenerate_groups_is_numerical_failure(tmp_path):
    t = quantile_grid(50)
    path = tmp_path / "q.csv"
    keys = [(f"s{i}", "x") for i in range(4)]
    io.write_quantiles(path, keys, t, [t] * 4)
    groups = write_groups(tmp_path / "g.csv", {"s0": "A", "s1": "A", "s2": "B", "s3": "B"})
    assert main(["test", "--input", str(path), "--groups", str(groups), "--reps", "5",
                 "--out-dir", str(tmp_path)]) == 3


# ---------------------------------------------------------------------------
# simulate


def write_spec(path, text):
    path.write_text(text)
    return path


def test_simulate_writes_rate_table(tmp_path):
    spec = write_spec(tmp_path / "law.txt", "mu_mean = 0, 1\nmu_cov = 1, 0.2; 0.2, 1\nsigma_mean = 1, 2\n"
                      "sigma_cov = 0.01, 0; 0, 0.01\nn_list = 50, 200, 800\nreplicates = 20\n")
    assert main(["simulate", "--input", str(spec), "--grid", "50", "--seed", "3", "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--input", str(spec), "--grid", "50", "--seed", "3", "--out-dir", str(tmp_path / "b"),
                 "--workers", "2"]) == 0
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b")
    rows = [l.split(",") for l in (tmp_path / "a" / "rates.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == ["n", "N", "replicate_count", "mean_error", "se_error", "slope"]
    assert [r[:3] for r in rows[1:4]] == [["50", "exact", "20"], ["200", "exact", "20"], ["800", "exact", "20"]]
    assert rows[-1][0] == "slope" and -0.7 < float(rows[-1][-1]) < -0.3


def test_simulate_degenerate_law(tmp_path):
    spec = write_spec(tmp_path / "law.txt", "mu_mean = 0\nmu_cov = 0\nsigma_mean = 1\nsigma_cov = 0\n"
                      "n_list = 10, 20\nreplicates = 3\n")
    assert main(["simulate", "--input", str(spec), "--grid", "20", "--out-dir", str(tmp_path)]) == 0
    rows = [l.split(",") for l in (tmp_path / "rates.csv").read_text().splitlines() if not l.startswith("#")]
    assert [float(r[3]) for r in rows[1:3]] == [0.0, 0.0]


@pytest.mark.parametrize("text", ["mu_mean = 0\n", "law = spiral\nn_list = 10\n",
                                  "mu_mean = 0\nmu_cov = 1\nsigma_mean = 1\nsigma_cov = 0\nn_list = 10, 20\nwidth = 3\n"])
def test_simulate_bad_spec_is_usage_error(tmp_path, text):
    spec = write_spec(tmp_path / "law.txt", text)
    assert main(["simulate", "--input", str(spec), "--out-dir", str(tmp_path)]) == 1


# ---------------------------------------------------------------------------
# exit codes


def test_usage_errors(tmp_path, raw_file):
    with pytest.raises(SystemExit) as exc:
        main(["estimate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--input", "x"])
    assert exc.value.code == 1
    assert main(["estimate", "--input", str(tmp_path / "missing.csv")]) == 1
    assert main(["estimate", "--input", str(raw_file), "--bandwidth", "-2"]) == 1

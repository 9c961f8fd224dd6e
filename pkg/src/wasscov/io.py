"""CSV/JSON readers and writers for the command-line pipeline.

Input formats (long CSV, header required):

* raw samples: ``subject_id,component_id,value``
* histograms / life tables: ``unit_id,index,bin_lower,bin_upper,count``
* quantile functions (wide): ``subject_id,component_id,<t_1>,...,<t_M>``
* groups: ``subject_id,group``

Lines starting with ``#`` are comments.  Floats are written with ``repr`` so
output bytes are reproducible and round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

RAW_HEADER = ["subject_id", "component_id", "value"]
HIST_HEADER = ["unit_id", "index", "bin_lower", "bin_upper", "count"]
GROUP_HEADER = ["subject_id", "group"]


def fmt(x) -> str:
    return repr(float(x))


def _rows(path):
    """Yield ``(line_number, fields)`` for non-comment, non-blank lines."""
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, next(csv.reader([line]))


def _number(text: str, path, lineno: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: non-numeric {column} {text!r}") from None
    if not np.isfinite(v):
        raise DataError(f"{path}:{lineno}: non-finite {column} {text!r}")
    return v


def sniff(path) -> str:
    """Return ``'raw'``, ``'histogram'`` or ``'quantile'`` from the header line."""
    for _, fields in _rows(path):
        header = [f.strip() for f in fields]
        if header == RAW_HEADER:
            return "raw"
        if header == HIST_HEADER:
            return "histogram"
        if header[:2] == ["subject_id", "component_id"] and len(header) > 4:
            return "quantile"
        raise DataError(f"{path}: unrecognised header {','.join(header)!r}")
    raise DataError(f"{path}: file is empty")


def _natural_order(keys: list[str]) -> list[str]:
    try:
        return sorted(keys, key=float)
    except ValueError:
        return keys


@dataclass
class CellTable:
    """Records grouped by ``(subject, component)`` with their source lines."""

    kind: str
    cells: dict = field(default_factory=dict)
    subjects: list = field(default_factory=list)
    components: list = field(default_factory=list)

    def add(self, subject: str, component: str, record):
        self.cells.setdefault((subject, component), []).append(record)

    def finish(self) -> "CellTable":
        self.subjects = list(dict.fromkeys(s for s, _ in self.cells))
        self.components = _natural_order(list(dict.fromkeys(c for _, c in self.cells)))
        missing = [(s, c) for s in self.subjects for c in self.components if (s, c) not in self.cells]
        if missing:
            listing = ", ".join(f"({s}, {c})" for s, c in missing)
            raise DataError(f"missing (subject, component) cells: {listing}")
        return self


def _check_header(path, fields, expected):
    header = [f.strip() for f in fields]
    if header != expected:
        raise DataError(f"{path}: expected header {','.join(expected)!r}, got {','.join(header)!r}")


def read_raw_samples(path) -> CellTable:
    """Raw observations; records are ``(value, line_number)``."""
    table = CellTable("raw")
    rows = _rows(path)
    for lineno, fields in rows:
        _check_header(path, fields, RAW_HEADER)
        break
    else:
        raise DataError(f"{path}: file is empty")
    for lineno, fields in rows:
        if len(fields) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
        subject, component = fields[0].strip(), fields[1].strip()
        table.add(subject, component, (_number(fields[2], path, lineno, "value"), lineno))
    return table.finish()


def read_histograms(path) -> CellTable:
    """Binned counts; records are ``(lower, upper, count, line_number)``."""
    table = CellTable("histogram")
    rows = _rows(path)
    for lineno, fields in rows:
        _check_header(path, fields, HIST_HEADER)
        break
    else:
        raise DataError(f"{path}: file is empty")
    for lineno, fields in rows:
        if len(fields) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
        lo = _number(fields[2], path, lineno, "bin_lower")
        hi = _number(fields[3], path, lineno, "bin_upper")
        count = _number(fields[4], path, lineno, "count")
        if not lo < hi:
            raise DataError(f"{path}:{lineno}: bin_lower must be below bin_upper")
        if count < 0:
            raise DataError(f"{path}:{lineno}: negative count")
        table.add(fields[0].strip(), fields[1].strip(), (lo, hi, count, lineno))
    return table.finish()


def histogram_cell(records, path, subject, component):
    """Assemble contiguous ``(edges, counts)`` from one cell's bin records."""
    recs = sorted(records)
    edges = [recs[0][0]]
    counts = []
    for lo, hi, count, lineno in recs:
        if lo != edges[-1]:
            raise DataError(
                f"{path}:{lineno}: bins for unit {subject!r}, index {component!r} are not contiguous at {lo}"
            )
        edges.append(hi)
        counts.append(count)
    return np.array(edges), np.array(counts)


@dataclass
class QuantileTable:
    subjects: list
    components: list
    tgrid: np.ndarray
    data: np.ndarray  # (n, p, M)


def read_quantiles(path) -> QuantileTable:
    rows = _rows(path)
    for lineno, fields in rows:
        header = [f.strip() for f in fields]
        break
    else:
        raise DataError(f"{path}: file is empty")
    if header[:2] != ["subject_id", "component_id"]:
        raise DataError(f"{path}:{lineno}: not a quantile file")
    tgrid = np.array([_number(h, path, lineno, "tgrid header") for h in header[2:]])
    table = CellTable("quantile")
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        values = np.array([_number(v, path, lineno, "quantile value") for v in fields[2:]])
        if np.any(np.diff(values) < 0):
            raise DataError(f"{path}:{lineno}: quantile values must be nondecreasing")
        key = (fields[0].strip(), fields[1].strip())
        if key in table.cells:
            raise DataError(f"{path}:{lineno}: duplicate row for subject {key[0]!r}, component {key[1]!r}")
        table.add(*key, values)
    table.finish()
    data = np.array([[table.cells[(s, c)][0] for c in table.components] for s in table.subjects])
    return QuantileTable(table.subjects, table.components, tgrid, data)


def read_groups(path) -> dict[str, str]:
    """``subject_id -> group`` in file order."""
    rows = _rows(path)
    for lineno, fields in rows:
        _check_header(path, fields, GROUP_HEADER)
        break
    else:
        raise DataError(f"{path}: file is empty")
    groups = {}
    for lineno, fields in rows:
        if len(fields) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
        subject, group = fields[0].strip(), fields[1].strip()
        if subject in groups:
            raise DataError(f"{path}:{lineno}: subject {subject!r} listed twice")
        groups[subject] = group
    return groups


# ---------------------------------------------------------------------------
# writers


def _comment_block(comments: dict | None) -> str:
    if not comments:
        return ""
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in comments.items())


def _write(path, text: str):
    Path(path).write_bytes(text.encode())


def write_quantiles(path, keys, tgrid, values, comments=None):
    """Wide quantile CSV: one row per ``(subject, component)`` key."""
    lines = [_comment_block(comments), ",".join(["subject_id", "component_id"] + [fmt(t) for t in tgrid]) + "\n"]
    for (subject, component), row in zip(keys, values):
        lines.append(",".join([subject, component] + [fmt(v) for v in row]) + "\n")
    _write(path, "".join(lines))


def write_matrix_csv(path, labels, values, comments=None):
    lines = [_comment_block(comments), ",".join([""] + list(labels)) + "\n"]
    for label, row in zip(labels, values):
        lines.append(",".join([label] + [fmt(v) for v in row]) + "\n")
    _write(path, "".join(lines))


def write_table_csv(path, header, rows, comments=None):
    lines = [_comment_block(comments), ",".join(header) + "\n"]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    _write(path, "".join(lines))


def write_json(path, obj):
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def matrix_document(labels, values, n: int, M: int, time_index=None, config=None) -> dict:
    doc = {
        "labels": list(labels),
        "values": [[float(v) for v in row] for row in np.asarray(values)],
        "n": int(n),
        "M": int(M),
    }
    if time_index is not None:
        doc["time_index"] = [float(y) for y in time_index]
    if config is not None:
        doc["config"] = config
    return doc

"""Run configuration: flat ``key = value`` files overridden by CLI flags."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

from ._grid import DEFAULT_DENSITY_GRID_SIZE, DEFAULT_QUANTILE_GRID_SIZE
from .inference import STATISTIC_KINDS


class UsageError(Exception):
    """Bad command-line usage or configuration."""


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise UsageError(f"{source}:{lineno}: empty key")
        if key in out:
            raise UsageError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_kv(text, str(path))


def _int(key: str, value: str, minimum: int) -> int:
    try:
        v = int(value)
    except ValueError:
        raise UsageError(f"{key} must be an integer, got {value!r}") from None
    if v < minimum:
        raise UsageError(f"{key} must be >= {minimum}, got {v}")
    return v


def _float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"{key} must be a number, got {value!r}") from None


def _bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"{key} must be true or false, got {value!r}")


def parse_bandwidth(value: str) -> float | None:
    if value.lower() == "auto":
        return None
    h = _float("bandwidth", value)
    if h <= 0:
        raise UsageError(f"bandwidth must be positive, got {h}")
    return h


def parse_support(key: str, value: str) -> tuple[float, float]:
    parts = [p for p in value.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 2:
        raise UsageError(f"{key} must be 'lower, upper', got {value!r}")
    lo, hi = (_float(key, p) for p in parts)
    if not lo < hi:
        raise UsageError(f"{key} needs lower < upper, got {lo}, {hi}")
    return lo, hi


@dataclass
class RunConfig:
    grid: int = DEFAULT_QUANTILE_GRID_SIZE
    density_grid: int = DEFAULT_DENSITY_GRID_SIZE
    bandwidth: float | None = None
    support: tuple | None = None
    supports: dict = field(default_factory=dict)
    reps: int = 1000
    seed: int = 0
    statistic: str = "log_frobenius"
    time_index: bool = False
    surface_grid: int = 101
    workers: int = 1

    def update(self, mapping: dict[str, str]) -> "RunConfig":
        for key, value in mapping.items():
            if key.startswith("support."):
                self.supports[key[len("support."):]] = parse_support(key, value)
            elif key == "support":
                self.support = parse_support(key, value)
            elif key == "grid":
                self.grid = _int(key, value, 3)
            elif key == "density_grid":
                self.density_grid = _int(key, value, 3)
            elif key == "bandwidth":
                self.bandwidth = parse_bandwidth(value)
            elif key == "reps":
                self.reps = _int(key, value, 1)
            elif key == "seed":
                self.seed = _int(key, value, 0)
            elif key == "statistic":
                if value not in STATISTIC_KINDS:
                    raise UsageError(f"statistic must be one of {', '.join(STATISTIC_KINDS)}, got {value!r}")
                self.statistic = value
            elif key == "time_index":
                self.time_index = _bool(key, value)
            elif key == "surface_grid":
                self.surface_grid = _int(key, value, 2)
            elif key == "workers":
                self.workers = _int(key, value, 1)
            else:
                raise UsageError(f"unknown config key {key!r}")
        return self

    def support_for(self, component: str) -> tuple | None:
        return self.supports.get(component, self.support)

    def to_dict(self) -> dict:
        """Everything needed to reproduce an output (``workers`` does not change results)."""
        d = asdict(self)
        d.pop("workers")
        d["bandwidth"] = "auto" if self.bandwidth is None else self.bandwidth
        d["support"] = None if self.support is None else list(self.support)
        d["supports"] = {k: list(v) for k, v in sorted(self.supports.items())}
        return d

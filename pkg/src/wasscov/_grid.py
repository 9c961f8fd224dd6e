"""Grid and quadrature helpers used by every estimator."""

from __future__ import annotations

import numpy as np

from .errors import DataError

DEFAULT_QUANTILE_GRID_SIZE = 1000
DEFAULT_DENSITY_GRID_SIZE = 512


def quantile_grid(size: int = DEFAULT_QUANTILE_GRID_SIZE) -> np.ndarray:
    """Equispaced grid on [0, 1], both endpoints included."""
    if size < 3:
        raise DataError(f"quantile grid needs at least 3 points, got {size}")
    return np.linspace(0.0, 1.0, size)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Weights w with ``w @ f == np.trapezoid(f, grid)``."""
    grid = np.asarray(grid, dtype=float)
    d = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += d / 2.0
    w[1:] += d / 2.0
    return w


def check_same_grid(a: np.ndarray, b: np.ndarray, what: str = "tgrid") -> None:
    if a.shape != b.shape or not np.array_equal(a, b):
        raise DataError(f"mismatched {what}: inputs must share the same grid")


def ulp_tolerance(values: np.ndarray) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    return 4.0 * float(np.spacing(max(scale, 1.0)))


def repair_monotone(values: np.ndarray, what: str = "values") -> np.ndarray:
    """Remove floating-point sized decreases; raise on genuine inversions."""
    values = np.asarray(values, dtype=float)
    drops = np.diff(values)
    if drops.size and drops.min() < 0.0:
        if drops.min() < -ulp_tolerance(values):
            raise DataError(f"{what} must be nondecreasing (largest drop {drops.min():.3g})")
        values = np.maximum.accumulate(values)
    return values

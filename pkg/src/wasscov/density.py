"""Density, distribution and quantile estimates on compact supports.

Raw observations are smoothed with a Gaussian kernel whose contribution at
each evaluation point is reweighted by the kernel mass falling inside the
support, then renormalised.  The result is a proper density on the support,
which is integrated to a CDF and inverted to a quantile function on the
library-wide grid ``t = linspace(0, 1, M)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import ndtr

from ._grid import (
    DEFAULT_DENSITY_GRID_SIZE,
    quantile_grid,
    repair_monotone,
)
from .errors import DataError

_NORMALIZATION_TOL = 1e-9
_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Support:
    """Compact interval ``[lower, upper]`` holding a distribution."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise DataError(f"support bounds must be finite, got [{lo}, {hi}]")
        if not lo < hi:
            raise DataError(f"support needs lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def grid(self, size: int = DEFAULT_DENSITY_GRID_SIZE) -> np.ndarray:
        if size < 3:
            raise DataError(f"density grid needs at least 3 points, got {size}")
        return np.linspace(self.lower, self.upper, size)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    support: Support
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1 or grid.size < 3:
            raise DataError("density grid and values must be 1-d arrays of equal length >= 3")
        if np.any(np.diff(grid) <= 0):
            raise DataError("density grid must be strictly increasing")
        if not np.all(np.isfinite(values)) or values.min() < 0:
            raise DataError("density values must be finite and nonnegative")
        total = np.trapezoid(values, grid)
        if abs(total - 1.0) > _NORMALIZATION_TOL:
            raise DataError(f"density integrates to {total!r}, expected 1")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, u):
        return np.interp(u, self.grid, self.values, left=0.0, right=0.0)


@dataclass(frozen=True, eq=False)
class CdfEstimate:
    support: Support
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1 or grid.size < 2:
            raise DataError("cdf grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise DataError("cdf grid must be strictly increasing")
        if abs(values[0]) > _NORMALIZATION_TOL or abs(values[-1] - 1.0) > _NORMALIZATION_TOL:
            raise DataError("cdf must run from 0 to 1")
        values = repair_monotone(values, "cdf")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, u):
        return np.interp(u, self.grid, self.values, left=0.0, right=1.0)


@dataclass(frozen=True, eq=False)
class QuantileFunction:
    """Nondecreasing function tabulated on an equispaced grid of [0, 1]."""

    tgrid: np.ndarray
    values: np.ndarray
    support: Support | None = field(default=None)

    def __post_init__(self):
        tgrid = np.asarray(self.tgrid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if tgrid.shape != values.shape or tgrid.ndim != 1 or tgrid.size < 3:
            raise DataError("quantile tgrid and values must be 1-d arrays of equal length >= 3")
        if tgrid[0] != 0.0 or tgrid[-1] != 1.0:
            raise DataError("quantile tgrid must span [0, 1]")
        if not np.all(np.isfinite(values)):
            raise DataError("quantile values must be finite")
        values = repair_monotone(values, "quantile function")
        if self.support is not None:
            tol = 1e-9 * max(1.0, self.support.width)
            if values[0] < self.support.lower - tol or values[-1] > self.support.upper + tol:
                raise DataError("quantile values leave the support")
        object.__setattr__(self, "tgrid", tgrid)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        return np.interp(t, self.tgrid, self.values)


# ---------------------------------------------------------------------------
# validation helpers


def check_sample(values, support: Support | None = None) -> np.ndarray:
    """Return ``values`` as a float array after enforcing the raw-sample contract."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise DataError("sample is empty")
    if not np.all(np.isfinite(x)):
        raise DataError("sample contains non-finite values")
    if support is not None:
        bad = (x < support.lower) | (x > support.upper)
        if bad.any():
            raise DataError(
                f"{int(bad.sum())} sample value(s) outside support "
                f"[{support.lower}, {support.upper}], e.g. {x[bad][0]!r}"
            )
    return x


def silverman_bandwidth(sample, support: Support | None = None) -> float:
    """Rule-of-thumb bandwidth ``0.9 min(sd, IQR/1.34) N^(-1/5)``.

    Degenerate samples (zero spread) fall back to a tenth of the support
    width; the result is capped at half the support width.
    """
    x = check_sample(sample)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    if x.max() == x.min():
        sd = 0.0  # std of a constant can round to a tiny positive value
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    h = 0.9 * spread * x.size ** (-0.2)
    if support is None:
        if h <= 0:
            raise DataError("cannot choose a bandwidth for a constant sample without a support")
        return h
    if h <= 0:
        h = 0.1 * support.width
    return min(h, 0.5 * support.width)


def histogram_bandwidth(bin_edges, counts) -> float:
    """Rule-of-thumb bandwidth for binned data, using count-weighted midpoints."""
    edges = np.asarray(bin_edges, dtype=float)
    w = np.asarray(counts, dtype=float)
    mid = 0.5 * (edges[:-1] + edges[1:])
    total = w.sum()
    if total <= 0:
        raise DataError("histogram has zero total count")
    mean = w @ mid / total
    sd = np.sqrt(w @ (mid - mean) ** 2 / total)
    cdf = np.cumsum(w) / total
    q25, q75 = np.interp([0.25, 0.75], cdf, mid)
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    width = edges[-1] - edges[0]
    h = 0.9 * spread * max(total, 2.0) ** (-0.2)
    # never narrower than one bin: smoothing below the bin scale only reproduces the binning
    h = max(h, np.max(np.diff(edges)))
    return float(min(h, 0.5 * width))


def _check_bandwidth(bandwidth: float, support: Support) -> float:
    h = float(bandwidth)
    if not np.isfinite(h) or h <= 0:
        raise DataError(f"bandwidth must be positive, got {bandwidth!r}")
    if h > support.width:
        raise DataError(f"bandwidth {h} exceeds the support width {support.width}")
    return h


def _boundary_corrected(raw: np.ndarray, grid: np.ndarray, support: Support, h: float) -> np.ndarray:
    # divide by the kernel mass that stays inside the support at each grid point
    inside = ndtr((support.upper - grid) / h) - ndtr((support.lower - grid) / h)
    f = raw / inside
    return f / np.trapezoid(f, grid)


def estimate_density(
    sample,
    support: Support,
    bandwidth: float | None = None,
    grid_size: int = DEFAULT_DENSITY_GRID_SIZE,
) -> DensityEstimate:
    """Boundary-corrected Gaussian kernel density estimate on ``support``.

    Parameters
    ----------
    sample : array_like
        Observations, all inside ``support``.
    support : Support
        Known compact support of the target density.
    bandwidth : float, optional
        Kernel standard deviation. Defaults to :func:`silverman_bandwidth`.
    grid_size : int
        Number of equispaced evaluation points on the support.
    """
    x = check_sample(sample, support)
    h = silverman_bandwidth(x, support) if bandwidth is None else _check_bandwidth(bandwidth, support)
    grid = support.grid(grid_size)
    raw = np.zeros_like(grid)
    # chunked so the (grid x sample) kernel matrix stays small
    for start in range(0, x.size, 4096):
        z = (grid[:, None] - x[None, start:start + 4096]) / h
        raw += np.exp(-0.5 * z * z).sum(axis=1)
    raw /= x.size * h * _SQRT_2PI
    return DensityEstimate(support, grid, _boundary_corrected(raw, grid, support, h))


def histogram_to_density(
    bin_edges,
    counts,
    bandwidth: float,
    grid_size: int = DEFAULT_DENSITY_GRID_SIZE,
) -> DensityEstimate:
    """Kernel-smooth a histogram on the span of its bin edges.

    Each bin's mass is spread uniformly over the bin before smoothing, so the
    smoothed value is an exact convolution of the histogram density with the
    Gaussian kernel; the same boundary correction as :func:`estimate_density`
    is then applied.
    """
    edges = np.asarray(bin_edges, dtype=float)
    w = np.asarray(counts, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise DataError("need at least two bin edges")
    if not np.all(np.isfinite(edges)) or np.any(np.diff(edges) <= 0):
        raise DataError("bin edges must be finite and strictly increasing")
    if w.shape != (edges.size - 1,):
        raise DataError(f"expected {edges.size - 1} counts, got {w.size}")
    if not np.all(np.isfinite(w)) or w.min() < 0:
        raise DataError("counts must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise DataError("histogram has zero total count")
    support = Support(edges[0], edges[-1])
    h = _check_bandwidth(bandwidth, support)
    grid = support.grid(grid_size)
    lo, hi = edges[:-1], edges[1:]
    mass = w / total / (hi - lo)
    raw = (ndtr((grid[:, None] - lo) / h) - ndtr((grid[:, None] - hi) / h)) @ mass
    return DensityEstimate(support, grid, _boundary_corrected(raw, grid, support, h))


def deaths_from_survivors(ages, survivors, age_range: tuple[float, float] | None = None):
    """Convert a life-table survivor column into an age-at-death histogram.

    ``survivors[a]`` is the number still alive at ``ages[a]``; deaths in
    ``[ages[a], ages[a+1])`` are the successive differences.  Returns
    ``(bin_edges, counts)`` restricted to ``age_range`` when given.
    """
    ages = np.asarray(ages, dtype=float)
    alive = np.asarray(survivors, dtype=float)
    if ages.shape != alive.shape or ages.size < 2:
        raise DataError("ages and survivors must be equal-length arrays")
    if np.any(np.diff(ages) <= 0):
        raise DataError("ages must be strictly increasing")
    deaths = -np.diff(alive)
    if deaths.min() < 0:
        raise DataError("survivor counts must be nonincreasing")
    edges = ages
    if age_range is not None:
        lo, hi = age_range
        keep = (ages[:-1] >= lo) & (ages[1:] <= hi)
        if not keep.any():
            raise DataError(f"no complete age bins inside {age_range}")
        first, last = np.flatnonzero(keep)[[0, -1]]
        edges = ages[first:last + 2]
        deaths = deaths[first:last + 1]
    return edges, deaths


# ---------------------------------------------------------------------------
# density -> cdf -> quantile


def density_to_cdf(f: DensityEstimate) -> CdfEstimate:
    F = cumulative_trapezoid(f.values, f.grid, initial=0.0)
    F /= F[-1]
    F[-1] = 1.0
    return CdfEstimate(f.support, f.grid, F)


def inverse_cdf(F: CdfEstimate, levels) -> np.ndarray:
    """Monotone-interpolated generalized inverse of a tabulated CDF.

    Flat runs of the CDF collapse to one knot: the last point of an interior
    run and the first point of the terminal run at level 1, so the inverse is
    single valued and equals ``inf{u : F(u) >= t}`` between knots.
    """
    Fv, u = F.values, F.grid
    rises = np.flatnonzero(np.diff(Fv) > 0)
    if rises.size == 0:
        raise DataError("cdf has no increase")
    keep = np.union1d(rises, rises[-1] + 1)
    return np.interp(levels, Fv[keep], u[keep])


def cdf_to_quantile(F: CdfEstimate, tgrid: np.ndarray | None = None) -> QuantileFunction:
    """Quantile function of ``F`` on ``tgrid`` (default ``M = 1000``).

    The endpoints are pinned to the support bounds.
    """
    t = quantile_grid() if tgrid is None else np.asarray(tgrid, dtype=float)
    q = inverse_cdf(F, t)
    q[0] = F.support.lower
    q[-1] = F.support.upper
    return QuantileFunction(t, np.maximum.accumulate(q), F.support)


def empirical_quantile(sample, tgrid: np.ndarray | None = None) -> QuantileFunction:
    """Left-continuous empirical inverse ``inf{x : F_N(x) >= t}``."""
    x = np.sort(check_sample(sample))
    t = quantile_grid() if tgrid is None else np.asarray(tgrid, dtype=float)
    # the small offset keeps t*N that should be an integer from rounding up
    idx = np.ceil(t * x.size - 1e-9).astype(int) - 1
    return QuantileFunction(t, x[np.clip(idx, 0, x.size - 1)])


def quantile_to_cdf(q: QuantileFunction, grid_size: int = DEFAULT_DENSITY_GRID_SIZE) -> CdfEstimate:
    """Invert a quantile function back to a CDF on ``[q(0), q(1)]``."""
    support = Support(q.values[0], q.values[-1])
    u = support.grid(grid_size)
    vals, t = q.values, q.tgrid
    # collapse atoms (flat quantile runs) to their right end so interp sees increasing knots
    keep = np.append(np.diff(vals) > 0, True)
    F = np.interp(u, vals[keep], t[keep])
    F[0], F[-1] = 0.0, 1.0
    return CdfEstimate(support, u, F)


def estimate_quantile(
    sample,
    support: Support,
    bandwidth: float | None = None,
    grid_size: int = DEFAULT_DENSITY_GRID_SIZE,
    tgrid: np.ndarray | None = None,
) -> QuantileFunction:
    """Raw sample to smooth quantile function (density, then CDF, then inverse)."""
    return cdf_to_quantile(density_to_cdf(estimate_density(sample, support, bandwidth, grid_size)), tgrid)


def parallel_map(func: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map, optionally on a thread pool.

    Results do not depend on ``workers``: each item is computed independently
    and collected in input order.
    """
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))

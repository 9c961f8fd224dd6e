"""Optimal-transport geometry of one-dimensional distributions.

Distances and inner products are evaluated in quantile form on the shared
``tgrid`` with the trapezoidal rule.  Transport maps live on the grid of
their source distribution and are composed by linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._grid import check_same_grid, repair_monotone
from .density import CdfEstimate, QuantileFunction, inverse_cdf
from .errors import DataError


@dataclass(frozen=True, eq=False)
class TransportMap:
    """A map tabulated on ``domain_grid``; evaluates by linear interpolation."""

    domain_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.domain_grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise DataError("transport map grid and values must be equal-length 1-d arrays")
        if np.any(np.diff(grid) <= 0):
            raise DataError("transport map grid must be strictly increasing")
        object.__setattr__(self, "domain_grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, u):
        return np.interp(u, self.domain_grid, self.values)

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    @classmethod
    def identity(cls, grid) -> "TransportMap":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, grid.copy())


def _pair(q1: QuantileFunction, q2: QuantileFunction):
    check_same_grid(q1.tgrid, q2.tgrid)
    return q1.values, q2.values, q1.tgrid


def wasserstein_distance(q1: QuantileFunction, q2: QuantileFunction) -> float:
    """L2 distance between quantile functions."""
    a, b, t = _pair(q1, q2)
    return float(np.sqrt(np.trapezoid((a - b) ** 2, t)))


def tangent_inner_product(q1: QuantileFunction, q2: QuantileFunction, base: QuantileFunction) -> float:
    """Inner product at ``base`` of the transports from ``base`` to ``q1`` and ``q2``.

    Computed as ``int (B^-1 - Q1^-1)(B^-1 - Q2^-1) dt``.
    """
    a, b, t = _pair(q1, q2)
    check_same_grid(t, base.tgrid)
    return float(np.trapezoid((base.values - a) * (base.values - b), t))


def optimal_transport_map(F: CdfEstimate, g_quantile: QuantileFunction) -> TransportMap:
    """Monotone map ``G^-1 o F`` pushing the law of ``F`` onto that of ``g_quantile``."""
    values = np.interp(F.values, g_quantile.tgrid, g_quantile.values)
    return TransportMap(F.grid, repair_monotone(values, "transport map"))


def parallel_transport(T1: TransportMap, F1: CdfEstimate, F2: CdfEstimate) -> TransportMap:
    """Move ``T1`` (a transport out of ``F1``) to the tangent space at ``F2``.

    Returns ``T1 o T12 - T12 + id`` on the grid of ``F2`` with
    ``T12 = F1^-1 o F2``.  The result is a tangent vector and need not be
    monotone when the two base measures differ strongly in scale.
    """
    u = F2.grid
    t12 = inverse_cdf(F1, F2.values)
    return TransportMap(u, T1(t12) - t12 + u)


def map_inner_product(T1: TransportMap, T2: TransportMap, base: QuantileFunction) -> float:
    """Inner product of two tangent vectors at the law with quantile ``base``.

    Substituting ``u = base(t)`` turns the integral against the base density
    into ``int {T1(base(t)) - base(t)}{T2(base(t)) - base(t)} dt``; unlike
    :func:`tangent_inner_product` the maps need not be monotone.
    """
    b = base.values
    return float(np.trapezoid((T1(b) - b) * (T2(b) - b), base.tgrid))

"""Sample Wasserstein means, variances and covariances of density vectors.

All estimators work on a ``QuantileEnsemble``: an ``(n, p, M)`` array of
quantile functions sharing one ``tgrid``.  Sample covariances use the
divisor ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._grid import DEFAULT_DENSITY_GRID_SIZE, check_same_grid, trapezoid_weights, ulp_tolerance
from .density import QuantileFunction, quantile_to_cdf
from .errors import DataError, NumericalError
from .geometry import map_inner_product, optimal_transport_map, parallel_transport


def _check_time_index(time_index, p: int) -> np.ndarray:
    y = np.asarray(time_index, dtype=float)
    if y.shape != (p,):
        raise DataError(f"time_index needs {p} entries, got shape {y.shape}")
    if p < 2:
        raise DataError("time_index needs at least two components")
    if y[0] < 0 or y[-1] > 1:
        raise DataError("time_index must lie in [0, 1]")
    steps = np.diff(y)
    if np.any(steps <= 0):
        raise DataError("time_index must be strictly increasing")
    if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, steps.mean()):
        raise DataError("time_index must be equispaced")
    return y


def subject_mean(x: np.ndarray) -> np.ndarray:
    """Mean over axis 0, shifted by the first row so identical rows average exactly."""
    return x[0] + (x - x[0]).mean(axis=0)


@dataclass(frozen=True, eq=False)
class QuantileEnsemble:
    """``n`` subjects by ``p`` components of quantile functions on ``tgrid``.

    ``data[i, j]`` holds the quantile values of subject ``i``, component ``j``.
    With ``deviations=True`` the rows are mean-centred processes rather than
    quantile functions and are not required to be monotone.
    """

    data: np.ndarray
    tgrid: np.ndarray
    labels: tuple = field(default=())
    time_index: np.ndarray | None = None
    deviations: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        tgrid = np.asarray(self.tgrid, dtype=float)
        if data.ndim != 3:
            raise DataError(f"ensemble data must be (n, p, M), got shape {data.shape}")
        n, p, m = data.shape
        if n < 2:
            raise DataError(f"ensemble needs at least 2 subjects, got {n}")
        if tgrid.shape != (m,) or tgrid[0] != 0.0 or tgrid[-1] != 1.0:
            raise DataError("tgrid must have M points spanning [0, 1]")
        if not np.all(np.isfinite(data)):
            raise DataError("ensemble contains non-finite quantile values")
        if not self.deviations:
            drops = np.diff(data, axis=-1)
            if drops.size and drops.min() < -ulp_tolerance(data):
                raise DataError("every quantile function must be nondecreasing")
        labels = tuple(str(x) for x in self.labels) if self.labels else tuple(str(j) for j in range(p))
        if len(labels) != p:
            raise DataError(f"expected {p} labels, got {len(labels)}")
        time_index = None if self.time_index is None else _check_time_index(self.time_index, p)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "tgrid", tgrid)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "time_index", time_index)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_quantiles(cls, rows: Sequence[Sequence[QuantileFunction]], labels=(), time_index=None):
        tgrid = rows[0][0].tgrid
        for row in rows:
            for q in row:
                check_same_grid(tgrid, q.tgrid)
        data = np.array([[q.values for q in row] for row in rows])
        return cls(data, tgrid, labels, time_index)

    def quantile(self, i: int, j: int) -> QuantileFunction:
        return QuantileFunction(self.tgrid, self.data[i, j])

    def centered(self) -> np.ndarray:
        return self.data - subject_mean(self.data)

    def subset(self, rows) -> "QuantileEnsemble":
        return QuantileEnsemble(self.data[rows], self.tgrid, self.labels, self.time_index, self.deviations)


@dataclass(frozen=True, eq=False)
class CrossCovSurface:
    sgrid: np.ndarray
    tgrid: np.ndarray
    values: np.ndarray

    def trace(self) -> float:
        """Trapezoidal integral of the diagonal ``C(t, t)``."""
        return float(np.trapezoid(np.diag(self.values), self.tgrid))


@dataclass(frozen=True, eq=False)
class WassersteinCovMatrix:
    labels: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError("covariance matrix must be square")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True, eq=False)
class CovSurface:
    """Covariance kernel on ``ygrid x ygrid`` with bilinear interpolation."""

    ygrid: np.ndarray
    values: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.ygrid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (y.size, y.size):
            raise DataError("surface values must be (p, p) for a p-point ygrid")
        object.__setattr__(self, "ygrid", y)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_interp", RegularGridInterpolator((y, y), values, method="linear"))

    def __call__(self, y, z):
        y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
        out = self._interp(np.stack([y.ravel(), z.ravel()], axis=-1))
        return out.reshape(y.shape) if y.ndim else float(out[0])

    def on_grid(self, grid) -> np.ndarray:
        """Surface values at every pair of points of ``grid``."""
        g = np.asarray(grid, dtype=float)
        yy, zz = np.meshgrid(g, g, indexing="ij")
        return self(yy, zz)


def _check_component(ens: QuantileEnsemble, j: int) -> int:
    if not 0 <= j < ens.p:
        raise DataError(f"component index {j} out of range for p = {ens.p}")
    return j


def wasserstein_mean(ens: QuantileEnsemble, component: int) -> QuantileFunction:
    j = _check_component(ens, component)
    return QuantileFunction(ens.tgrid, subject_mean(ens.data[:, j]))


def wasserstein_variance(ens: QuantileEnsemble, component: int) -> float:
    """Mean squared Wasserstein distance of component ``j`` to its sample mean."""
    j = _check_component(ens, component)
    dev = ens.data[:, j] - subject_mean(ens.data[:, j])
    return float(np.trapezoid(dev ** 2, ens.tgrid, axis=-1).mean())


def cross_cov_surface(ens: QuantileEnsemble, j: int, k: int) -> CrossCovSurface:
    """Empirical cross-covariance ``C_jk(s, t)`` of the quantile processes."""
    _check_component(ens, j)
    _check_component(ens, k)
    xc = ens.centered()
    values = xc[:, j].T @ xc[:, k] / ens.n
    return CrossCovSurface(ens.tgrid, ens.tgrid, values)


def wasserstein_cov_matrix(ens: QuantileEnsemble) -> WassersteinCovMatrix:
    """``p x p`` matrix of integrated diagonal cross-covariances.

    Only the diagonals ``C_jk(t, t)`` are accumulated, never the full surfaces.
    """
    xc = ens.centered()
    weighted = xc * trapezoid_weights(ens.tgrid)
    values = np.tensordot(weighted, xc, axes=([0, 2], [0, 2])) / ens.n
    return WassersteinCovMatrix(ens.labels, 0.5 * (values + values.T))


def cov_to_corr(S: WassersteinCovMatrix) -> WassersteinCovMatrix:
    d = np.diag(S.values)
    if np.any(d <= 0):
        bad = [S.labels[i] if S.labels else str(i) for i in np.flatnonzero(d <= 0)]
        raise NumericalError(f"zero or negative variance for component(s) {', '.join(bad)}")
    scale = 1.0 / np.sqrt(d)
    r = S.values * scale[:, None] * scale[None, :]
    np.fill_diagonal(r, 1.0)
    return WassersteinCovMatrix(S.labels, np.clip(r, -1.0, 1.0))


def wasserstein_cov_kernel(ens: QuantileEnsemble) -> CovSurface:
    """Covariance kernel over the ensemble's equispaced ``time_index``."""
    if ens.time_index is None:
        raise DataError("ensemble has no time_index")
    return CovSurface(ens.time_index, wasserstein_cov_matrix(ens).values, ens.labels)


def cov_via_transports(ens: QuantileEnsemble, j: int, k: int, grid_size: int = DEFAULT_DENSITY_GRID_SIZE) -> float:
    """Wasserstein covariance through transport maps and parallel transport.

    Each subject's optimal map out of the sample mean of component ``j`` is
    parallel-transported to the mean of component ``k`` and paired with the
    subject's map out of that mean; the inner products are averaged.
    """
    mean_j, mean_k = wasserstein_mean(ens, j), wasserstein_mean(ens, k)
    F_j = quantile_to_cdf(mean_j, grid_size)
    F_k = quantile_to_cdf(mean_k, grid_size)
    total = 0.0
    for i in range(ens.n):
        T_ij = optimal_transport_map(F_j, ens.quantile(i, j))
        T_ik = optimal_transport_map(F_k, ens.quantile(i, k))
        total += map_inner_product(parallel_transport(T_ij, F_j, F_k), T_ik, mean_k)
    return total / ens.n

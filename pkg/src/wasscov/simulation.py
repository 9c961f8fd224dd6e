"""Location-scale density processes with a closed-form Wasserstein covariance.

Component ``j`` of a subject has quantile function ``mu_j + sigma_j B(t)``
with ``(mu, sigma)`` Gaussian, ``mu`` independent of ``sigma`` and ``B`` a
centred base quantile.  The population Wasserstein covariance is then
``mu_cov + c * sigma_cov`` with ``c = int_0^1 B(t)^2 dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import truncnorm

from ._grid import DEFAULT_DENSITY_GRID_SIZE, quantile_grid
from .density import QuantileFunction, Support, estimate_quantile, parallel_map
from .errors import DataError
from .estimation import QuantileEnsemble, wasserstein_cov_kernel, wasserstein_cov_matrix
from .geometry import wasserstein_distance


def centered_uniform(t):
    """Quantile of U[-1/2, 1/2]."""
    return np.asarray(t, dtype=float) - 0.5


def centered_truncnorm(bound: float = 2.0) -> Callable:
    """Quantile of a standard normal truncated to ``[-bound, bound]``."""
    dist = truncnorm(-bound, bound)

    def base(t):
        return dist.ppf(np.asarray(t, dtype=float))

    base.__name__ = f"truncnorm_{bound:g}"
    return base


def _psd(a, name: str, p: int) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape != (p, p):
        raise DataError(f"{name} must be {p} x {p}, got {a.shape}")
    if not np.allclose(a, a.T):
        raise DataError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(a).min() < -1e-10 * max(1.0, np.abs(a).max()):
        raise DataError(f"{name} must be positive semidefinite")
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class LocationScaleLaw:
    """Joint law of ``p`` location-scale quantile processes.

    ``sigma`` draws are truncated below at ``sigma_floor * sigma_mean`` so every
    draw stays a nondecreasing quantile function.  ``time_index`` (optional)
    places the components on an equispaced grid of [0, 1]; ``kernel_truth``
    gives the analytic covariance surface for continuous-index experiments.
    """

    mu_mean: np.ndarray
    mu_cov: np.ndarray
    sigma_mean: np.ndarray
    sigma_cov: np.ndarray
    base: Callable = centered_uniform
    sigma_floor: float = 0.05
    time_index: np.ndarray | None = None
    kernel_truth: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        mu_mean = np.atleast_1d(np.asarray(self.mu_mean, dtype=float))
        p = mu_mean.size
        sigma_mean = np.atleast_1d(np.asarray(self.sigma_mean, dtype=float))
        if sigma_mean.shape != (p,):
            raise DataError(f"sigma_mean must have {p} entries")
        if np.any(sigma_mean <= 0):
            raise DataError("sigma_mean entries must be positive")
        if not 0 < self.sigma_floor < 1:
            raise DataError("sigma_floor must lie in (0, 1)")
        object.__setattr__(self, "mu_mean", mu_mean)
        object.__setattr__(self, "sigma_mean", sigma_mean)
        object.__setattr__(self, "mu_cov", _psd(self.mu_cov, "mu_cov", p))
        object.__setattr__(self, "sigma_cov", _psd(self.sigma_cov, "sigma_cov", p))
        if self.time_index is not None:
            object.__setattr__(self, "time_index", np.asarray(self.time_index, dtype=float))
        lo, hi = float(self.base(0.0)), float(self.base(1.0))
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise DataError("base quantile must be bounded and increasing")
        centre = integrate.quad(self.base, 0.0, 1.0, limit=200)[0]
        if abs(centre) > 1e-8 * (hi - lo):
            raise DataError(f"base quantile must integrate to 0, got {centre:.3g}")

    @property
    def p(self) -> int:
        return self.mu_mean.size

    @property
    def base_second_moment(self) -> float:
        """``int_0^1 B(t)^2 dt`` by adaptive quadrature."""
        return integrate.quad(lambda t: self.base(t) ** 2, 0.0, 1.0, limit=200)[0]

    def oracle_cov(self) -> np.ndarray:
        """Population Wasserstein covariance matrix ``mu_cov + c sigma_cov``."""
        return self.mu_cov + self.base_second_moment * self.sigma_cov

    def base_quantile(self, tgrid=None) -> QuantileFunction:
        t = quantile_grid() if tgrid is None else np.asarray(tgrid, dtype=float)
        return QuantileFunction(t, self.base(t))

    def mean_quantiles(self, tgrid=None) -> np.ndarray:
        """Population Wasserstein mean quantiles, shape ``(p, M)``.

        Uses the mean of the truncated ``sigma``, which equals ``sigma_mean``
        whenever truncation has negligible probability.
        """
        b = self.base_quantile(tgrid).values
        return self.mu_mean[:, None] + self.sigma_mean[:, None] * b

    def draw_parameters(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        mu = rng.multivariate_normal(self.mu_mean, self.mu_cov, size=n, method="eigh")
        sigma = rng.multivariate_normal(self.sigma_mean, self.sigma_cov, size=n, method="eigh")
        return mu, np.maximum(sigma, self.sigma_floor * self.sigma_mean)


def brownian_location_law(
    p: int,
    scale: float = 1.0,
    sigma: float = 1.0,
    base: Callable = centered_uniform,
) -> LocationScaleLaw:
    """Continuous-index law whose locations follow a Brownian path in ``y``.

    Components sit at ``y_j = (j - 1)/(p - 1)`` and ``mu(y)`` has covariance
    ``scale * min(y, z)``; scales are fixed, so the covariance kernel is
    exactly ``scale * min(y, z)``.
    """
    y = np.linspace(0.0, 1.0, p)
    return LocationScaleLaw(
        mu_mean=np.zeros(p),
        mu_cov=scale * np.minimum.outer(y, y),
        sigma_mean=np.full(p, float(sigma)),
        sigma_cov=np.zeros((p, p)),
        base=base,
        time_index=y,
        kernel_truth=lambda a, b: scale * np.minimum(a, b),
    )


def draw_density_vector(law: LocationScaleLaw, rng: np.random.Generator, tgrid=None) -> list[QuantileFunction]:
    """One subject: ``p`` quantile functions ``mu_j + sigma_j B``."""
    b = law.base_quantile(tgrid)
    mu, sigma = law.draw_parameters(1, rng)
    return [QuantileFunction(b.tgrid, mu[0, j] + sigma[0, j] * b.values) for j in range(law.p)]


def draw_ensemble(law: LocationScaleLaw, n: int, rng: np.random.Generator, tgrid=None) -> QuantileEnsemble:
    """``n`` independent subjects as a quantile ensemble (vectorised draw)."""
    b = law.base_quantile(tgrid)
    mu, sigma = law.draw_parameters(n, rng)
    data = mu[..., None] + sigma[..., None] * b.values
    return QuantileEnsemble(data, b.tgrid, time_index=law.time_index)


def sample_observations(q: QuantileFunction, N: int, rng: np.random.Generator) -> np.ndarray:
    """``N`` inverse-CDF draws ``q(U)`` with ``U`` uniform on [0, 1]."""
    if N < 1:
        raise DataError(f"need N >= 1 observations, got {N}")
    return np.interp(rng.random(N), q.tgrid, q.values)


def estimate_from_observations(
    ens: QuantileEnsemble,
    N: int,
    rng: np.random.Generator,
    bandwidth: float | None = None,
    grid_size: int = DEFAULT_DENSITY_GRID_SIZE,
) -> QuantileEnsemble:
    """Replace each true quantile by the smooth estimate from ``N`` draws.

    The support of each cell is taken as the known range ``[q(0), q(1)]``.
    """
    out = np.empty_like(ens.data)
    for i in range(ens.n):
        for j in range(ens.p):
            q = ens.quantile(i, j)
            w = sample_observations(q, N, rng)
            support = Support(q.values[0], q.values[-1])
            out[i, j] = estimate_quantile(w, support, bandwidth, grid_size, ens.tgrid).values
    return QuantileEnsemble(out, ens.tgrid, ens.labels, ens.time_index)


def density_error(law: LocationScaleLaw, N: int, rng: np.random.Generator, component: int = 0,
                  bandwidth: float | None = None, tgrid=None) -> float:
    """Wasserstein distance between one random density and its estimate from ``N`` draws."""
    q = draw_density_vector(law, rng, tgrid)[component]
    w = sample_observations(q, N, rng)
    est = estimate_quantile(w, Support(q.values[0], q.values[-1]), bandwidth, tgrid=q.tgrid)
    return wasserstein_distance(q, est)


def surface_ise(estimate, truth: Callable, resolution: int = 101) -> float:
    """Integrated squared error over [0, 1]^2 of a covariance surface."""
    g = np.linspace(0.0, 1.0, resolution)
    yy, zz = np.meshgrid(g, g, indexing="ij")
    diff2 = (estimate(yy, zz) - truth(yy, zz)) ** 2
    return float(np.trapezoid(np.trapezoid(diff2, g, axis=1), g))


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` on ``log x``; nan if any ``y`` is not positive."""
    if np.any(np.asarray(y, float) <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


@dataclass
class RateRow:
    n: int
    N: int | None
    replicate_count: int
    mean_error: float
    se_error: float


@dataclass
class RateTable:
    rows: list
    slope: float
    kind: str = "matrix"
    errors: dict = field(default_factory=dict, repr=False)


def replicate_error(
    law: LocationScaleLaw,
    n: int,
    N: int | None,
    rng: np.random.Generator,
    kind: str = "matrix",
    tgrid=None,
    bandwidth: float | None = None,
    grid_size: int = DEFAULT_DENSITY_GRID_SIZE,
) -> float:
    """Error of one simulated estimate against the closed form.

    ``kind='matrix'`` gives the Frobenius error of the covariance matrix;
    ``kind='kernel'`` the integrated squared error of the interpolated
    covariance surface against ``law.kernel_truth``.
    """
    ens = draw_ensemble(law, n, rng, tgrid)
    if N is not None:
        ens = estimate_from_observations(ens, N, rng, bandwidth, grid_size)
    if kind == "matrix":
        est = wasserstein_cov_matrix(ens).values
        return float(np.linalg.norm(est - law.oracle_cov(), "fro"))
    if kind == "kernel":
        if law.kernel_truth is None or law.time_index is None:
            raise DataError("kernel experiments need a law with time_index and kernel_truth")
        return surface_ise(wasserstein_cov_kernel(ens), law.kernel_truth)
    raise DataError(f"unknown experiment kind {kind!r}")


def rate_experiment(
    law: LocationScaleLaw,
    n_list: Sequence[int],
    N_list: Sequence[int | None] = (None,),
    replicates: int = 100,
    seed: int = 0,
    kind: str = "matrix",
    tgrid=None,
    bandwidth: float | None = None,
    grid_size: int = DEFAULT_DENSITY_GRID_SIZE,
    workers: int = 1,
) -> RateTable:
    """Monte Carlo mean error over a grid of subject counts ``n`` and sample sizes ``N``.

    ``N = None`` uses the true densities (no density estimation).  Replicate
    ``r`` of cell ``c`` is driven by a generator seeded with ``(seed, c, r)``.
    The slope is the log-log regression of mean error on ``n`` at the largest
    ``N`` (``None`` counts as largest).
    """
    n_list, N_list = list(n_list), list(N_list)
    if any(n < 2 for n in n_list):
        raise DataError("every n must be at least 2")
    if n_list != sorted(n_list) or len(set(n_list)) != len(n_list):
        raise DataError("n_list must be strictly increasing")
    finite = [N for N in N_list if N is not None]
    if finite != sorted(finite) or N_list.count(None) > 1:
        raise DataError("N_list must be increasing")
    if replicates < 2:
        raise DataError("need at least 2 replicates for a standard error")

    rows, errors = [], {}
    cells = [(N, n) for N in N_list for n in n_list]
    for c, (N, n) in enumerate(cells):
        def one(r, n=n, N=N, c=c):
            rng = np.random.default_rng([seed, c, r])
            return replicate_error(law, n, N, rng, kind, tgrid, bandwidth, grid_size)

        errs = np.array(parallel_map(one, range(replicates), workers))
        errors[(n, N)] = errs
        rows.append(RateRow(n, N, replicates, float(errs.mean()), float(errs.std(ddof=1) / np.sqrt(replicates))))

    top = None if None in N_list else max(finite)
    top_rows = [r for r in rows if r.N == top]
    slope = loglog_slope([r.n for r in top_rows], [r.mean_error for r in top_rows]) if len(top_rows) > 1 else float("nan")
    return RateTable(rows, slope, kind, errors)

"""Bootstrap tests for equality of Wasserstein covariance across groups.

Under the null each subject's quantile process is centred at its own group's
Wasserstein mean; the centred processes are pooled, resampled with
replacement and split back into groups of the original sizes.  Replicate
``b`` draws from a Philox stream keyed by ``(seed, b)``, so the null
distribution does not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from ._grid import check_same_grid
from .density import parallel_map
from .errors import DataError, NumericalError
from .estimation import QuantileEnsemble, cov_to_corr, wasserstein_cov_matrix

STATISTIC_KINDS = ("log_frobenius", "corr_log_frobenius", "sqrt_distance", "corr_sqrt_distance")
LOG_EIGEN_FLOOR = 1e-8


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for replicate ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _as_array(m) -> np.ndarray:
    return np.asarray(getattr(m, "values", m), dtype=float)


def _symmetric(a: np.ndarray, what: str) -> np.ndarray:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"{what} must be square")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise DataError(f"{what} must be symmetric")
    return 0.5 * (a + a.T)


def spd_log(a, floor: float = LOG_EIGEN_FLOOR) -> tuple[np.ndarray, int]:
    """Principal matrix logarithm of a symmetric PSD matrix.

    Eigenvalues below ``floor * largest`` are raised to that level first.
    Returns the logarithm and the number of floored eigenvalues.
    """
    a = _symmetric(_as_array(a), "matrix")
    w, v = np.linalg.eigh(a)
    if w[-1] <= 0:
        raise NumericalError("matrix logarithm undefined: no positive eigenvalue")
    threshold = floor * w[-1]
    floored = int(np.sum(w < threshold))
    w = np.maximum(w, threshold)
    return (v * np.log(w)) @ v.T, floored


def psd_sqrt(a) -> np.ndarray:
    """Principal square root after clipping negative eigenvalues at 0."""
    a = _symmetric(_as_array(a), "surface")
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def _pairs_sum(transformed: Sequence[np.ndarray], squared: bool) -> float:
    total = 0.0
    for a, b in combinations(transformed, 2):
        d = np.linalg.norm(a - b, "fro")
        total += d * d if squared else d
    return float(total)


def statistic_log_frobenius(matrices) -> float:
    """Sum over group pairs of squared Frobenius distances between matrix logs."""
    return _pairs_sum([spd_log(m)[0] for m in matrices], squared=True)


def statistic_sqrt_distance(surfaces) -> float:
    """Sum over group pairs of Frobenius distances between principal square roots."""
    return _pairs_sum([psd_sqrt(s) for s in surfaces], squared=False)


@dataclass(frozen=True, eq=False)
class GroupedEnsembles:
    labels: tuple
    ensembles: tuple

    def __post_init__(self):
        labels, ensembles = tuple(self.labels), tuple(self.ensembles)
        if len(labels) != len(ensembles):
            raise DataError("one label per group is required")
        if len(ensembles) < 2:
            raise DataError("at least two groups are required")
        if len(set(labels)) != len(labels):
            raise DataError("group labels must be distinct")
        first = ensembles[0]
        for label, ens in zip(labels, ensembles):
            if ens.p != first.p:
                raise DataError(f"group {label!r} has {ens.p} components, expected {first.p}")
            check_same_grid(first.tgrid, ens.tgrid)
            if (first.time_index is None) != (ens.time_index is None) or (
                first.time_index is not None and not np.allclose(first.time_index, ens.time_index)
            ):
                raise DataError(f"group {label!r} has a different time_index")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ensembles", ensembles)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        return cls(tuple(l for l, _ in pairs), tuple(e for _, e in pairs))

    @property
    def sizes(self) -> tuple:
        return tuple(e.n for e in self.ensembles)


def center_and_pool(groups: GroupedEnsembles | Sequence[QuantileEnsemble]) -> QuantileEnsemble:
    """Centre every subject at its group mean and stack all groups."""
    ensembles = groups.ensembles if isinstance(groups, GroupedEnsembles) else tuple(groups)
    first = ensembles[0]
    data = np.concatenate([e.centered() for e in ensembles], axis=0)
    return QuantileEnsemble(data, first.tgrid, first.labels, first.time_index, deviations=True)


def _group_matrices(data: np.ndarray, sizes, template: QuantileEnsemble, use_corr: bool):
    out, start = [], 0
    for size in sizes:
        ens = QuantileEnsemble(data[start:start + size], template.tgrid, template.labels, deviations=True)
        S = wasserstein_cov_matrix(ens)
        out.append(cov_to_corr(S) if use_corr else S)
        start += size
    return out


def group_statistic(data: np.ndarray, sizes, template: QuantileEnsemble, kind: str) -> float:
    """Statistic ``kind`` for consecutive blocks of ``data`` with the given sizes."""
    if kind not in STATISTIC_KINDS:
        raise DataError(f"unknown statistic {kind!r}; choose from {', '.join(STATISTIC_KINDS)}")
    mats = _group_matrices(data, sizes, template, kind.startswith("corr_"))
    if kind.endswith("log_frobenius"):
        return statistic_log_frobenius(mats)
    return statistic_sqrt_distance(mats)


@dataclass(frozen=True, eq=False)
class TestResult:
    statistic: float
    p_value: float
    replicates: int
    null_distribution: np.ndarray
    seed: int
    statistic_kind: str = "log_frobenius"
    group_sizes: tuple = ()
    group_labels: tuple = ()
    metadata: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "statistic": float(self.statistic),
            "p_value": float(self.p_value),
            "B": int(self.replicates),
            "seed": int(self.seed),
            "statistic_kind": self.statistic_kind,
            "group_sizes": [int(s) for s in self.group_sizes],
            "group_labels": list(self.group_labels),
            "null_distribution": [float(s) for s in self.null_distribution],
            **self.metadata,
        }


def bootstrap_p_value(observed: float, null) -> float:
    null = np.asarray(null, dtype=float)
    return float((1 + np.count_nonzero(null >= observed)) / (null.size + 1))


def bootstrap_test(
    groups: GroupedEnsembles,
    statistic: str = "log_frobenius",
    B: int = 1000,
    seed: int = 0,
    workers: int = 1,
) -> TestResult:
    """Bootstrap test of equal Wasserstein covariance across groups.

    Parameters
    ----------
    groups : GroupedEnsembles
        Two or more groups, each with at least two subjects.
    statistic : str
        One of ``STATISTIC_KINDS``; ``corr_*`` variants normalise each
        group's matrix to a correlation matrix first.
    B : int
        Number of bootstrap replicates.
    seed : int
        Root seed; replicate ``b`` uses ``replicate_rng(seed, b)``.
    workers : int
        Threads used for replicates.  The result is identical for any value.
    """
    if B < 1:
        raise DataError(f"need at least one bootstrap replicate, got {B}")
    if statistic not in STATISTIC_KINDS:
        raise DataError(f"unknown statistic {statistic!r}; choose from {', '.join(STATISTIC_KINDS)}")
    sizes = groups.sizes
    template = groups.ensembles[0]
    observed_data = np.concatenate([e.data for e in groups.ensembles], axis=0)
    observed = group_statistic(observed_data, sizes, template, statistic)
    pooled = center_and_pool(groups).data
    total = pooled.shape[0]

    def replicate(b: int) -> float:
        idx = replicate_rng(seed, b).integers(0, total, size=total)
        try:
            return group_statistic(pooled[idx], sizes, template, statistic)
        except NumericalError as exc:
            raise NumericalError(f"bootstrap replicate {b}: {exc}") from None

    null = np.array(parallel_map(replicate, range(B), workers))
    floors = 0
    if statistic.endswith("log_frobenius"):
        mats = _group_matrices(observed_data, sizes, template, statistic.startswith("corr_"))
        floors = sum(spd_log(m)[1] for m in mats)
    return TestResult(
        statistic=observed,
        p_value=bootstrap_p_value(observed, null),
        replicates=B,
        null_distribution=null,
        seed=seed,
        statistic_kind=statistic,
        group_sizes=sizes,
        group_labels=groups.labels,
        metadata={"eigenvalue_floor": LOG_EIGEN_FLOOR, "floored_eigenvalues": int(floors)},
    )

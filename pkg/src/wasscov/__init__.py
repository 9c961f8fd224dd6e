"""Wasserstein means, variances and covariances for vectors of random densities."""

from .density import (
    CdfEstimate,
    DensityEstimate,
    QuantileFunction,
    Support,
    cdf_to_quantile,
    density_to_cdf,
    empirical_quantile,
    estimate_density,
    estimate_quantile,
    histogram_to_density,
    quantile_to_cdf,
)
from .errors import DataError, NumericalError
from .estimation import (
    CovSurface,
    CrossCovSurface,
    QuantileEnsemble,
    WassersteinCovMatrix,
    cov_to_corr,
    cov_via_transports,
    cross_cov_surface,
    wasserstein_cov_kernel,
    wasserstein_cov_matrix,
    wasserstein_mean,
    wasserstein_variance,
)
from .geometry import (
    TransportMap,
    optimal_transport_map,
    parallel_transport,
    tangent_inner_product,
    wasserstein_distance,
)
from .inference import (
    GroupedEnsembles,
    TestResult,
    bootstrap_test,
    center_and_pool,
    statistic_log_frobenius,
    statistic_sqrt_distance,
)
from .simulation import (
    LocationScaleLaw,
    draw_density_vector,
    draw_ensemble,
    rate_experiment,
    sample_observations,
)

__version__ = "0.1.0"

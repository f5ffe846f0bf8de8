"""Spatially referenced Gaussian mixture clustering of gene expression profiles.

Each cluster models its members as draws from a Gaussian
process over the spots, approximated with nearest-neighbor (Vecchia)
conditionals whose Cholesky factors are integrated out under a conjugate
prior. Labels are fitted by stochastic EM.
"""

from .errors import (
    DegeneratePriorError,
    InvalidArgumentError,
    NumericalFailureError,
    ParseError,
    ResourceError,
    SRGMMError,
)
from .hyperprior import ThetaParams, select_neighbor_count, spot_prior
from .kernels import BACKEND, available_backends, get_backend
from .marginal_likelihood import (
    ClusterParams,
    MomentCache,
    NeighborRule,
    PriorConfig,
    cluster_log_marginal,
    log_posterior,
)
from .posterior import correlation_maps, correlation_summary, covariance_from_factors, map_cholesky
from .sem import FitConfig, FitResult, fit
from .spatial_order import SpatialDesign, build_neighbor_lists, maximin_order
from .synthetic import KernelSpec, ScenarioSpec, rand_index, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClusterParams", "DegeneratePriorError", "FitConfig", "FitResult", "InvalidArgumentError",
    "KernelSpec", "MomentCache", "NeighborRule", "NumericalFailureError", "ParseError", "PriorConfig",
    "ResourceError", "SRGMMError", "ScenarioSpec", "SpatialDesign", "ThetaParams", "available_backends",
    "build_neighbor_lists", "cluster_log_marginal", "correlation_maps", "correlation_summary",
    "covariance_from_factors", "fit", "get_backend", "log_posterior", "map_cholesky", "maximin_order",
    "rand_index", "select_neighbor_count", "simulate_dataset", "spot_prior",
]

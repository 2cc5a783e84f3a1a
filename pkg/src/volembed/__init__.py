"""Low-dimensional random Gaussian embeddings that approximately preserve simplex volumes."""

__version__ = "0.1.0"

from .bounds import (
    BoundParams,
    Certificate,
    contraction_tail_bound,
    distance_distortion_bound,
    distance_union_bound_feasible,
    expansion_tail_bound,
    exponent_h,
    l_param,
    search_thresholds,
    t_param,
    volume_distortion_bound,
    volume_union_bound_feasible,
)
from .distortion import (
    DistortionReport,
    SubsetStrategy,
    distance_distortion,
    distortion_report,
    embed,
    normalized_volume_ratio,
)
from .gamma import (
    chi_square_cdf,
    log_gamma,
    lower_incgamma_bound,
    regularized_lower_incomplete_gamma,
    stirling_bounds,
    upper_incgamma_bound,
)
from .linalg import (
    LinearMap,
    LogVolume,
    PointSet,
    apply_map,
    difference_matrix,
    general_position_check,
    log_simplex_volume,
)
from .randgen import (
    ChiProductSpec,
    RandomSeed,
    gaussian_matrix,
    sample_chi_square,
    sample_chi_square_product,
    synthetic_points,
)
from .stats import EmpiricalCdf, OrderingReport, ks_one_sample, ks_two_sample, verify_gordon, verify_stability

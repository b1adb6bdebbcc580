"""Frequentist and Bayesian confidence measures for the problem of regions,
computed by multiscale and two-step multiscale bootstrap under a multivariate
normal model."""

from .confidence import (
    ConfidenceReport,
    combine_three_region,
    exact_slab_p_values,
    p_extrapolate_exact,
    p_from_psi,
    p_sided,
    p_taylor,
)
from .distributions import (
    BivariateArgs,
    bivariate_normal_cdf,
    bivariate_normal_pdf,
    bivariate_rectangle_prob,
    clamp_correlation,
    noncentral_chisq_cdf,
    std_normal_cdf,
    std_normal_quantile,
)
from .errors import (
    ConfigError,
    CorrelationClampWarning,
    DimensionMismatchError,
    InvalidParameterError,
    NoExactExtrapolationError,
    NumericalError,
    RegionbootError,
    SelectionError,
    UnsupportedOracleError,
)
from .fitting import (
    FitResult,
    ModelSelection,
    fit,
    loglik_one_step,
    loglik_two_step,
    select,
)
from .models import (
    REGISTRY,
    ModelSpec,
    PolyPsi,
    RhoCorrection,
    SingularPsi,
    ThreeRegionModel,
    TwoRegionModel,
    delta_rho,
    joint_prob,
    marginal_prob,
    psi_derivatives,
    rho_correction_for,
    three_region_opp_dir,
    three_region_same_dir,
)
from .pipeline import evaluate_measures, run_pipeline
from .regions import (
    Cone2D,
    HalfSpace,
    Slab,
    SphericalShell,
    classify,
    exact_bootstrap_prob,
    exact_one_sided_shell,
    exact_p_shell,
    exact_p_slab,
    region_from_dict,
    region_to_dict,
    shell_critical_constants,
    slab_critical_constant,
)
from .sampling import (
    MultiscaleCounts,
    ScaleGrid,
    complement_counts,
    counts_from_csv,
    counts_to_csv,
    default_scale_grid,
    sample_counts,
)

__version__ = "0.1.0"

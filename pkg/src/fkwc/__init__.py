"""Nonparametric k-sample tests for equality of covariance operators of
functional data, built on functional-data-depth ranks."""

__version__ = "0.1.0"

from .exceptions import (
    DataError,
    FkwcError,
    InfeasibleError,
    NumericalError,
    ParameterError,
)
from .fdata import (
    FunctionalDataset,
    Grid,
    center_by_deepest,
    differentiate,
    inner_product,
    l2_norm,
    load_csv,
    load_json,
    save_csv,
    save_json,
)
from .depths import (
    DepthSpec,
    DepthVector,
    MEDIAN_HEURISTIC,
    RankVector,
    compute_depth,
    depth_ranks,
    halfspace_depth_2d,
    ksd_depth,
    ltr_depth,
    ltr_rank_scores,
    mbd,
    mfhd,
    ranks_with_tiebreak,
    rp_depth,
    rp_depth_deriv,
    spatial_depth,
)
from .testing import (
    MCResult,
    TestConfig,
    TestResult,
    fkwc_test,
    kw_statistic,
    percentile_statistic,
    steel_mc,
    wilcoxon_rank_sum,
)
from .power import (
    LocalAlternativeSpec,
    PowerResult,
    RankProbability,
    SupportDensity,
    density_from_callable,
    density_from_samples,
    local_tau,
    mc_rank_prob,
    noncentral_chisq_sf,
    power_from_local,
    power_from_pairwise,
    predicted_power,
    required_sample_size,
    tau_from_pairwise,
)
from .sim import (
    ProcessModel,
    StudyResult,
    StudySpec,
    fourier_basis,
    gen_eigen,
    gen_gp,
    gen_skew_gp,
    gen_t1,
    generate,
    run_study,
    save_study_csv,
    scenario_eigenvalues,
    scenario_models,
    squared_exponential_kernel,
)

__all__ = [name for name in dir() if not name.startswith("_")]

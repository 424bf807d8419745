"""Critical-volume NTCP calculus and self-normalized CLT estimation for
dependent lattice fields of functional subunits."""

from .cv_ntcp import (
    ApproxResult,
    FractionCurveFeatures,
    OrganSpec,
    damage_volume,
    dose_for_fraction,
    fraction_curve_features,
    invert_fraction,
    kill_fraction,
    normal_cdf,
    normal_quantile,
    ntcp_exact,
    ntcp_normal,
    ntcp_normal_integer_threshold,
    ntcp_weiss,
    threshold_for_confidence,
)
from .dependent_clt import (
    EstimatorConfig,
    NormalizedStatistic,
    confidence_interval,
    default_bandwidth,
    ntcp_estimate,
    partial_sum,
    self_normalized_statistic,
    variance_estimator,
    variance_gap,
)
from .dose_response import (
    CellPopulation,
    Hybrid,
    LinearQuadratic,
    MultiTarget,
    SingleHit,
    dose_for_kill_probability,
    fsu_kill_probability,
    surviving_fraction,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    coverage_study,
    estimator_consistency,
    fit_rate,
    ks_distance,
    run_clt_experiment,
    write_report,
)
from .lattice_fields import (
    FieldSample,
    IidBernoulli,
    LatticeCube,
    MovingWindowLevels,
    MovingWindowThreshold,
    covariance_at_lag,
    load_sample,
    model_mean,
    model_sigma2,
    sample_field,
    save_sample,
)

__version__ = "0.1.0"

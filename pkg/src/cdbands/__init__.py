"""Conformal prediction bands from conditional density estimates.

Two density-based band constructions (an interval method built on
calibrated CDF-transform scores, and a level-set method calibrated
locally on a profile partition of feature space), the standard
split-conformal baselines, synthetic scenarios with exact oracles, and a
benchmark runner.
"""

from .core import (
    Band,
    EMPTY_BAND,
    InsufficientDataError,
    LabelSet,
    Sample,
    SplitPair,
    YGrid,
    band_contains,
    band_size,
    empirical_quantile,
    empirical_quantile_lower,
    features_matrix,
    labels,
    make_samples,
    merge_intervals,
    split_data,
    targets,
)
from .estimators import (
    CdeModel,
    CdfCurve,
    DensityCurve,
    KnnMad,
    KnnQuantile,
    KnnRegression,
    SoftmaxClassifier,
    cde_cdf,
    cde_density,
    cdf_inverse,
    cdf_value,
    fit_cde,
    fit_classifier,
    fit_mad,
    fit_quantile,
    fit_regression,
    predict_mad,
    predict_probs,
    predict_quantile,
    predict_regression,
)
from .dist_split import (
    DistSplitCalibration,
    calibrate_dist_split,
    dist_split_band,
    dist_split_bands,
)
from .cd_split import (
    CdSplitCalibration,
    CdSplitLabelCalibration,
    Partition,
    ProfileVector,
    TGrid,
    assign_partition,
    build_partition,
    calibrate_cd_split,
    calibrate_cd_split_labels,
    cd_split_band,
    cd_split_bands,
    cd_split_labelset,
    class_profile_distance,
    default_partition_count,
    profile,
    profile_distance,
    threshold_band,
)
from .baselines import (
    calibrate_local_reg_split,
    calibrate_probability_split,
    calibrate_quantile_split,
    calibrate_reg_split,
    local_reg_split_band,
    probability_split_labelset,
    quantile_split_band,
    reg_split_band,
)
from .simulation import (
    OracleCde,
    Scenario,
    TrueConditional,
    default_grid,
    oracle_hpd_band,
    oracle_interval,
    sample_scenario,
    sample_targets,
    stream_seed,
    true_cdf,
    true_density,
    true_label_probs,
)
from .metrics import (
    MetricReport,
    avg_size,
    ccad,
    conditional_coverage,
    interval_loss,
    marginal_coverage,
)
from .runner import (
    ConfigError,
    ExperimentConfig,
    ResultRecord,
    run_experiment,
    summarize,
    write_csv,
)

__version__ = "0.1.0"

"""Locally decorrelated channel features.

A detection toolkit built around one observation: boosted trees with
orthogonal splits waste most of their capacity on locally correlated
image features, and removing that correlation (either inside the
split, via LDA projections, or ahead of boosting, with small learned
decorrelation filters) buys large accuracy gains at negligible cost.

The package covers the full path from pixels to miss-rate curves:
channel computation, stationary correlation estimates, filter bank
construction, boosting with bootstrapped negatives, multiscale
sliding-window detection, and FPPI-based evaluation, plus synthetic
benchmarks that isolate the estimator behavior in two dimensions.
"""

from .errors import (
    LdcfError,
    ConfigError,
    DataError,
)
from .imgio import (
    Image,
    GroundTruthBox,
    load_image,
    save_image,
    load_annotations,
    list_images,
    scan_dataset,
)
from .channels import (
    ChannelConfig,
    ChannelStack,
    compute_channels,
    aggregate,
    save_stack,
    load_stack,
)
from .linstats import (
    Autocorrelation,
    estimate_autocorr_fft,
    estimate_autocorr_brute,
    patch_covariance,
    window_covariance,
    sym_eig,
    transform_features,
    save_autocorr,
    load_autocorr,
)
from .filterbank import (
    FilterBankConfig,
    FilterBank,
    derive_filters,
    apply_filterbank,
    save_filterbank,
    load_filterbank,
)
from .boost import (
    BoostConfig,
    BoostedEnsemble,
    FeatureGeometry,
    TrainingSet,
    FixedSigma,
    SharedStationarySigma,
    PerPatchSigma,
    train_realboost,
    score,
    score_matrix,
    calibrate_cascade,
    save_ensemble,
    load_ensemble,
)
from .detect import (
    Detection,
    DetectorConfig,
    build_pyramid,
    pyramid_scales,
    window_features,
    detect,
    nms,
    harvest_negatives,
    save_detections,
    load_detections,
)
from .evaluate import (
    EvalCurve,
    match_detections,
    curve,
    log_average_mr,
    save_curve,
)
from .config import (
    RunConfig,
    TrainConfig,
    load_run_config,
    parse_kv_text,
)
from .synthbench import (
    SynthSpec,
    BenchReport,
    run_fig1,
    run_fig2,
    save_report,
    format_table,
)
from .synthdata import (
    DeskSpec,
    make_desk_dataset,
    write_desk_dataset,
)
from .deskrun import (
    DeskComparison,
    desk_run_config,
    run_desk_comparison,
)

__version__ = "0.1.0"

__all__ = [
    "LdcfError", "ConfigError", "DataError",
    "Image", "GroundTruthBox", "load_image", "save_image",
    "load_annotations", "list_images", "scan_dataset",
    "ChannelConfig", "ChannelStack", "compute_channels", "aggregate",
    "save_stack", "load_stack",
    "Autocorrelation", "estimate_autocorr_fft", "estimate_autocorr_brute",
    "patch_covariance", "window_covariance", "sym_eig",
    "save_autocorr", "load_autocorr",
    "FilterBankConfig", "FilterBank", "derive_filters", "apply_filterbank",
    "transform_features", "save_filterbank", "load_filterbank",
    "BoostConfig", "BoostedEnsemble", "FeatureGeometry", "TrainingSet",
    "FixedSigma", "SharedStationarySigma", "PerPatchSigma",
    "train_realboost", "score", "score_matrix", "calibrate_cascade",
    "save_ensemble", "load_ensemble",
    "Detection", "DetectorConfig", "build_pyramid", "pyramid_scales",
    "window_features", "detect", "nms", "harvest_negatives",
    "save_detections", "load_detections",
    "EvalCurve", "match_detections", "curve", "log_average_mr", "save_curve",
    "RunConfig", "TrainConfig", "load_run_config", "parse_kv_text",
    "SynthSpec", "BenchReport", "run_fig1", "run_fig2", "save_report",
    "format_table",
    "DeskSpec", "make_desk_dataset", "write_desk_dataset",
    "DeskComparison", "desk_run_config", "run_desk_comparison",
    "__version__",
]

"""isa2: proper-speed regression from the semantic layout of driving scenes.

The pipeline turns multi-scale segmentation score maps into label maps,
pools label histograms over a spatial pyramid, and trains a suite of
hand-implemented regressors to predict the speed a vehicle *should*
travel, evaluated jointly or per scenario.
"""

__version__ = "0.1.0"

from .dataset import (
    DEFAULT_CLASS_COUNT,
    VOID_ID,
    Manifest,
    Sample,
    Scenario,
    Split,
    filter_manifest,
    load_label_map,
    load_manifest,
    write_label_map,
    write_manifest,
)
from .evaluation import EvalReport, export_trace, mae, run_regime
from .features import (
    PyramidConfig,
    Standardization,
    apply_standardization,
    cell_histogram,
    compute_features,
    descriptor_length,
    fit_standardization,
    spp_descriptor,
)
from .fusion import ScoreMapSet, argmax_labels, fuse_scales, upsample_nearest
from .regressors import (
    TrainConfig,
    cross_validate,
    fit_boosting,
    fit_lasso,
    fit_mlp,
    fit_ols,
    fit_svr,
    predict,
)
from .synthetic import DEFAULT_SPEED_TARGETS, SyntheticConfig, generate_synthetic

__all__ = [
    "DEFAULT_CLASS_COUNT",
    "DEFAULT_SPEED_TARGETS",
    "EvalReport",
    "Manifest",
    "PyramidConfig",
    "Sample",
    "Scenario",
    "ScoreMapSet",
    "Split",
    "Standardization",
    "SyntheticConfig",
    "TrainConfig",
    "VOID_ID",
    "apply_standardization",
    "argmax_labels",
    "cell_histogram",
    "compute_features",
    "cross_validate",
    "descriptor_length",
    "export_trace",
    "filter_manifest",
    "fit_boosting",
    "fit_lasso",
    "fit_mlp",
    "fit_ols",
    "fit_standardization",
    "fit_svr",
    "fuse_scales",
    "generate_synthetic",
    "load_label_map",
    "load_manifest",
    "mae",
    "predict",
    "run_regime",
    "spp_descriptor",
    "upsample_nearest",
    "write_label_map",
    "write_manifest",
]

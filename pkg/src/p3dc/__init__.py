"""Prior-driven discrete calibration for nearest-prototype few-shot
classification, with an episodic evaluation and sweep harness."""

__version__ = "0.1.0"

from .calibrate import (
    CalibConfig,
    CalibratedSupport,
    NeighborSet,
    TaskNeighborUnion,
    calibrate_support_set,
    l2_normalize,
    recombine,
    sample_level_endpoint,
    softmax_weights,
    task_level_endpoint,
    task_union,
    top_m_prototypes,
    tukey_transform,
    unified_calibrate,
)
from .classify import (
    ClassPrototype,
    PredictMode,
    attention_weights,
    attentive_prototype,
    average_prototype,
    cl2n_transform,
    classify,
    dc_style_calibrate,
)
from .episodes import (
    Episode,
    EvalReport,
    confidence_interval,
    evaluate,
    sample_episode,
)
from .store import (
    BasePrototypeSet,
    FeatureDataset,
    compute_base_prototypes,
    load_dataset,
    load_manifest,
    write_dataset,
)
from .sweep import SweepEntry, SweepGrid, SweepResult, emit_heatmap_csv, grid_sweep, select_best
from .synth import PRESETS, SynthConfig, class_centroids, generate, preset_config

__all__ = [
    "CalibConfig",
    "CalibratedSupport",
    "NeighborSet",
    "TaskNeighborUnion",
    "calibrate_support_set",
    "l2_normalize",
    "recombine",
    "sample_level_endpoint",
    "softmax_weights",
    "task_level_endpoint",
    "task_union",
    "top_m_prototypes",
    "tukey_transform",
    "unified_calibrate",
    "ClassPrototype",
    "PredictMode",
    "attention_weights",
    "attentive_prototype",
    "average_prototype",
    "cl2n_transform",
    "classify",
    "dc_style_calibrate",
    "Episode",
    "EvalReport",
    "confidence_interval",
    "evaluate",
    "sample_episode",
    "BasePrototypeSet",
    "FeatureDataset",
    "compute_base_prototypes",
    "load_dataset",
    "load_manifest",
    "write_dataset",
    "SweepEntry",
    "SweepGrid",
    "SweepResult",
    "emit_heatmap_csv",
    "grid_sweep",
    "select_best",
    "PRESETS",
    "SynthConfig",
    "class_centroids",
    "generate",
    "preset_config",
    "__version__",
]

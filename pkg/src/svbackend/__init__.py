"""Speaker-verification back-end: prototypes, cosine scoring, adaptive and
trainable score normalization, quality-aware calibration/fusion, detection
metrics, waveform augmentation, and a synthetic-embedding oracle."""

__version__ = "0.1.0"

from .core import cosine, dim_stats
from .metrics import DAY, NIGHT, DcfParams, dcf_c, eer, min_dcf, roc
from .normalization import (
    CohortStats,
    TasNormParams,
    TasNormTrainConfig,
    as_norm,
    cohort_stats,
    tas_norm,
    tas_norm_train,
)
from .scoring import SpeakerPrototype, build_prototype, score_trials
from .calibration import FusionModel, QmfVector, extract_qmf, fit_fusion, fuse

__all__ = [
    "DAY",
    "NIGHT",
    "CohortStats",
    "DcfParams",
    "FusionModel",
    "QmfVector",
    "SpeakerPrototype",
    "TasNormParams",
    "TasNormTrainConfig",
    "as_norm",
    "build_prototype",
    "cohort_stats",
    "cosine",
    "dcf_c",
    "dim_stats",
    "eer",
    "extract_qmf",
    "fit_fusion",
    "fuse",
    "min_dcf",
    "roc",
    "score_trials",
    "tas_norm",
    "tas_norm_train",
]

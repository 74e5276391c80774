"""Prototype construction and cosine nearest-prototype classification.

Two prototype schemes: the plain per-class average, and a query-guided
attentive average where attention weights are the softmax of the inner
products between the (raw, unnormalized) query and each calibrated support
feature.  Prediction is the argmax of cosine similarity between the
normalized query and each class prototype; exact ties go to the smaller
class id.

Also hosts the baseline feature transforms evaluated alongside the
calibrated mode: centered L2 normalization and the equal-weight
top-m-prototype calibration (the attentive-weights pipeline's unweighted
counterpart).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibrate import CalibConfig, l2_normalize, top_m_prototypes, tukey_transform
from .errors import ConfigError, DegenerateInputError
from .store import BasePrototypeSet

TRANSFORM_MODES = ("raw_nn", "l2n", "cl2n", "dc_style", "p3dc")
PROTOTYPE_MODES = ("average", "attentive")


@dataclass(frozen=True)
class ClassPrototype:
    class_id: int
    vector: np.ndarray


@dataclass(frozen=True)
class PredictMode:
    """Which support-feature transform and prototype scheme to evaluate.

    ``calib`` is required for the two calibrating transforms and ignored
    otherwise.  ``normalized_query_attention`` substitutes the normalized
    query for the raw one in the attention logits (ablation switch; the
    default follows the scale-sensitive formula).
    """

    transform: str = "p3dc"
    prototype: str = "attentive"
    calib: CalibConfig | None = None
    normalized_query_attention: bool = False

    def __post_init__(self):
        if self.transform not in TRANSFORM_MODES:
            raise ConfigError(
                f"unknown transform {self.transform!r}; expected one of {TRANSFORM_MODES}"
            )
        if self.prototype not in PROTOTYPE_MODES:
            raise ConfigError(
                f"unknown prototype mode {self.prototype!r}; expected one of {PROTOTYPE_MODES}"
            )
        if self.transform in ("dc_style", "p3dc") and self.calib is None:
            raise ConfigError(f"transform {self.transform!r} requires a CalibConfig")


def average_prototype(class_support: list[np.ndarray]) -> np.ndarray:
    """Unweighted mean of the class's support features."""
    if not class_support:
        raise DegenerateInputError("empty class support")
    return np.mean(np.asarray(class_support, dtype=np.float64), axis=0)


def attention_weights(
    q: np.ndarray,
    class_support: list[np.ndarray],
    normalized_query_attention: bool = False,
) -> np.ndarray:
    """Softmax of <q, x_k> over one class's support features.

    The raw query enters the logits, so attention sharpness scales with
    ||q||; weights are non-negative and sum to 1.
    """
    if not class_support:
        raise DegenerateInputError("empty class support")
    S = np.asarray(class_support, dtype=np.float64)
    qv = l2_normalize(q) if normalized_query_attention else np.asarray(q, dtype=np.float64)
    logits = S @ qv
    a = np.exp(logits - logits.max())
    return a / a.sum()


def attentive_prototype(
    q: np.ndarray,
    class_support: list[np.ndarray],
    normalized_query_attention: bool = False,
) -> np.ndarray:
    """Query-guided convex combination of the class's support features."""
    a = attention_weights(q, class_support, normalized_query_attention)
    return a @ np.asarray(class_support, dtype=np.float64)


def classify(q: np.ndarray, prototypes: list[ClassPrototype]) -> tuple[int, np.ndarray]:
    """Nearest prototype by cosine similarity.

    Returns the winning class id and the full score vector aligned with the
    given prototype list.  Ties break toward the smaller class id.
    """
    if not prototypes:
        raise DegenerateInputError("no prototypes to classify against")
    qbar = l2_normalize(q)
    scores = np.empty(len(prototypes), dtype=np.float64)
    for i, proto in enumerate(prototypes):
        p = np.asarray(proto.vector, dtype=np.float64)
        norm = np.linalg.norm(p)
        if norm == 0.0:
            raise DegenerateInputError(f"prototype for class {proto.class_id} is zero")
        scores[i] = (qbar @ p) / norm
    best = min(range(len(prototypes)), key=lambda i: (-scores[i], prototypes[i].class_id))
    return prototypes[best].class_id, scores


def cl2n_transform(v: np.ndarray, base_mean: np.ndarray) -> np.ndarray:
    """Center by the global base mean, then L2-normalize."""
    centered = np.asarray(v, dtype=np.float64) - np.asarray(base_mean, dtype=np.float64)
    return l2_normalize(centered)


def dc_style_calibrate(
    x: np.ndarray, protos: BasePrototypeSet, cfg: CalibConfig
) -> np.ndarray:
    """Power-transform, add the unweighted mean of the top-m prototypes,
    L2-normalize.  Equal neighbor weights; contrast with the softmax-weighted
    pipeline."""
    xt = tukey_transform(x, cfg.tukey_lambda, cfg.clamp_negative)
    nb = top_m_prototypes(xt, protos, cfg.m)
    shift = protos.prototypes[nb.indices].astype(np.float64).mean(axis=0)
    return l2_normalize(xt + shift)

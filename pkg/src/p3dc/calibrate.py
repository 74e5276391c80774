"""Discrete calibration of support features against base-class prototypes.

The pipeline, per support feature x with base prototypes P = {p_1..p_nb}:

    xbar = x / ||x||                       (direction of the raw feature)
    xt   = x ** lam                        (power transform, log at lam = 0)
    Lam  = top-m prototypes by <xt, p_j>   (inner product, raw-space p_j)
    s    = xt + sum_j w_j p_j  over Lam    (w = softmax of the similarities)
    LamT = union of Lam over the whole support set
    t    = xt + sum_j w_j p_j  over LamT   (softmax re-taken over the union)
    out  = normalize((1 - alpha - beta) xbar + alpha sbar + beta tbar)

with sbar/tbar the normalized endpoints.  (alpha, beta) are barycentric
coordinates inside the triangle (xbar, sbar, tbar); alpha + beta <= 1.

All math runs in float64 regardless of input dtype.  Inner products use the
transformed feature against *raw-space* prototypes, which makes the scores
scale-sensitive by design.  Weighted prototype sums accumulate in ascending
base-index order, so equal index sets yield bit-identical endpoints.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, DomainError
from .store import BasePrototypeSet

# Slack for barycentric-coordinate validation; absorbs float noise from
# grid construction (e.g. 3 * 0.1 + 7 * 0.1).
_BARY_TOL = 1e-9


@dataclass(frozen=True)
class CalibConfig:
    """Knobs of the calibration: power-transform exponent, neighborhood
    size, and the barycentric mix of the two endpoints."""

    tukey_lambda: float = 0.5
    m: int = 5
    alpha: float = 0.0
    beta: float = 0.0
    clamp_negative: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError(
                f"alpha and beta must be non-negative, got ({self.alpha}, {self.beta})"
            )
        if self.alpha + self.beta > 1.0 + _BARY_TOL:
            raise ConfigError(
                f"alpha + beta must not exceed 1, got {self.alpha} + {self.beta}"
            )


@dataclass(frozen=True)
class NeighborSet:
    """Top-m base prototypes of one feature: canonical base indices ordered
    by descending inner-product similarity, ties by ascending index."""

    indices: np.ndarray
    similarities: np.ndarray

    def __post_init__(self):
        self.indices.setflags(write=False)
        self.similarities.setflags(write=False)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class TaskNeighborUnion:
    """Sorted union of the neighbor sets of every support sample in a task."""

    indices: np.ndarray

    def __post_init__(self):
        self.indices.setflags(write=False)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class CalibratedSupport:
    """One support sample with every intermediate of the calibration.

    ``normalized``, ``sample_endpoint``, ``task_endpoint`` and ``calibrated``
    are unit vectors; ``transformed`` is the power-transformed feature and
    ``neighbors`` its top-m prototype set.
    """

    original: np.ndarray
    normalized: np.ndarray
    transformed: np.ndarray
    sample_endpoint: np.ndarray
    task_endpoint: np.ndarray
    calibrated: np.ndarray
    class_id: int
    neighbors: NeighborSet


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||_2 in float64.  Raises on the zero vector."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return v / norm

def tukey_transform(v: np.ndarray, lam: float, clamp_negative: bool = False) -> np.ndarray:
    """Elementwise power transform v**lam, or log(v) when lam == 0.

    Fractional exponents require non-negative entries; ``clamp_negative``
    substitutes 0 for offending entries instead of raising.  lam == 0
    requires strictly positive entries (no clamping applies).
    """
    v = np.asarray(v, dtype=np.float64)
    if lam == 0.0:
        if np.any(v <= 0.0):
            raise DomainError("log transform requires strictly positive entries")
        return np.log(v)
    if lam != int(lam) and np.any(v < 0.0):
        if not clamp_negative:
            raise DomainError(
                f"negative entries are outside the domain of exponent {lam}; "
                "enable clamp_negative to clamp them to zero"
            )
        v = np.maximum(v, 0.0)
    return np.power(v, lam)


def clamped_entry_count(features: np.ndarray) -> int:
    """How many entries a clamping power transform would zero out."""
    return int(np.count_nonzero(np.asarray(features) < 0.0))


def top_m_prototypes(x_t: np.ndarray, protos: BasePrototypeSet, m: int) -> NeighborSet:
    """The min(m, n_b) base indices with the largest inner product against
    ``x_t``, descending; exact similarity ties resolve to the smaller index."""
    if len(protos) == 0:
        raise DegenerateInputError("prototype set is empty")
    x_t = np.asarray(x_t, dtype=np.float64)
    sims = protos.prototypes.astype(np.float64) @ x_t
    m_eff = min(m, len(protos))
    # lexsort: primary key is the last one; arange settles ties by index.
    order = np.lexsort((np.arange(len(sims)), -sims))[:m_eff]
    return NeighborSet(indices=order.astype(np.int64), similarities=sims[order])


def softmax_weights(
    x_t: np.ndarray, protos: BasePrototypeSet, subset: np.ndarray
) -> np.ndarray:
    """Softmax over the inner products of ``x_t`` with the ``subset`` rows of
    the prototype matrix, aligned with ``subset`` order.  Max-subtracted, so
    large similarities cannot overflow."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise DegenerateInputError("softmax over an empty prototype subset")
    x_t = np.asarray(x_t, dtype=np.float64)
    sims = protos.prototypes[subset].astype(np.float64) @ x_t
    z = np.exp(sims - sims.max())
    return z / z.sum()


def _weighted_prototype_shift(
    x_t: np.ndarray, protos: BasePrototypeSet, indices: np.ndarray
) -> np.ndarray:
    # Canonical ascending-index order: equal index sets give bit-equal sums.
    idx = np.sort(np.asarray(indices, dtype=np.int64))
    w = softmax_weights(x_t, protos, idx)
    return np.asarray(x_t, dtype=np.float64) + w @ protos.prototypes[idx].astype(np.float64)


def sample_level_endpoint(
    x_t: np.ndarray, protos: BasePrototypeSet, neighbors: NeighborSet
) -> np.ndarray:
    """xt plus the softmax-weighted sum of its own top-m prototypes."""
    if len(neighbors) == 0:
        raise DegenerateInputError("empty neighbor set")
    return _weighted_prototype_shift(x_t, protos, neighbors.indices)


def task_union(neighbor_sets: list[NeighborSet]) -> TaskNeighborUnion:
    """Union of the given neighbor sets, sorted ascending."""
    if not neighbor_sets:
        raise DegenerateInputError("no neighbor sets to union")
    merged = np.unique(np.concatenate([ns.indices for ns in neighbor_sets]))
    return TaskNeighborUnion(indices=merged.astype(np.int64))


def task_level_endpoint(
    x_t: np.ndarray, protos: BasePrototypeSet, union: TaskNeighborUnion
) -> np.ndarray:
    """xt plus the softmax-weighted sum over the task-wide prototype union."""
    if len(union) == 0:
        raise DegenerateInputError("empty task union")
    return _weighted_prototype_shift(x_t, protos, union.indices)


def unified_calibrate(
    xbar: np.ndarray,
    sbar: np.ndarray,
    tbar: np.ndarray,
    alpha: float,
    beta: float,
) -> np.ndarray:
    """normalize((1 - alpha - beta) xbar + alpha sbar + beta tbar).

    At the corners (0,0)/(1,0)/(0,1) the combination is bitwise xbar/sbar/tbar
    before the final (idempotent) normalize.
    """
    if alpha < 0 or beta < 0 or alpha + beta > 1.0 + _BARY_TOL:
        raise ConfigError(f"({alpha}, {beta}) is outside the calibration triangle")
    combo = (1.0 - alpha - beta) * np.asarray(xbar, dtype=np.float64)
    combo = combo + alpha * np.asarray(sbar, dtype=np.float64)
    combo = combo + beta * np.asarray(tbar, dtype=np.float64)
    norm = np.linalg.norm(combo)
    if norm == 0.0:
        raise DegenerateInputError("barycentric combination collapsed to the zero vector")
    return combo / norm


def calibrate_support_set(
    support: list[tuple[np.ndarray, int]],
    protos: BasePrototypeSet,
    cfg: CalibConfig,
) -> list[CalibratedSupport]:
    """Run the full calibration over one task's support set.

    Neighbor sets for every sample are gathered first (the task union
    depends on all of them), then both endpoints and the final combination
    are computed per sample.  Errors from the component steps are re-raised
    with the offending sample index prepended.
    """
    if not support:
        raise DegenerateInputError("empty support set")

    if cfg.clamp_negative:
        n_clamped = sum(clamped_entry_count(x) for x, _ in support)
        if n_clamped:
            warnings.warn(
                f"power transform clamped {n_clamped} negative entries to zero",
                stacklevel=2,
            )

    normalized: list[np.ndarray] = []
    transformed: list[np.ndarray] = []
    neighbor_sets: list[NeighborSet] = []
    for i, (x, _) in enumerate(support):
        try:
            x = np.asarray(x)
            normalized.append(l2_normalize(x))
            xt = tukey_transform(x, cfg.tukey_lambda, cfg.clamp_negative)
            transformed.append(xt)
            neighbor_sets.append(top_m_prototypes(xt, protos, cfg.m))
        except (DomainError, DegenerateInputError) as e:
            raise type(e)(f"support sample {i}: {e}") from e

    union = task_union(neighbor_sets)

    out: list[CalibratedSupport] = []
    for i, (x, class_id) in enumerate(support):
        try:
            sbar = l2_normalize(sample_level_endpoint(transformed[i], protos, neighbor_sets[i]))
            tbar = l2_normalize(task_level_endpoint(transformed[i], protos, union))
            calibrated = unified_calibrate(normalized[i], sbar, tbar, cfg.alpha, cfg.beta)
        except (DomainError, DegenerateInputError) as e:
            raise type(e)(f"support sample {i}: {e}") from e
        out.append(
            CalibratedSupport(
                original=np.asarray(x),
                normalized=normalized[i],
                transformed=transformed[i],
                sample_endpoint=sbar,
                task_endpoint=tbar,
                calibrated=calibrated,
                class_id=int(class_id),
                neighbors=neighbor_sets[i],
            )
        )
    return out


def recombine(
    calibrated: list[CalibratedSupport], alpha: float, beta: float
) -> list[np.ndarray]:
    """Re-mix precomputed endpoints at new barycentric coordinates.

    The endpoints do not depend on (alpha, beta), so a sweep can calibrate
    once and recombine per grid point; output is bit-identical to a fresh
    ``calibrate_support_set`` at those coordinates.
    """
    return [
        unified_calibrate(c.normalized, c.sample_endpoint, c.task_endpoint, alpha, beta)
        for c in calibrated
    ]

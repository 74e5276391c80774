"""Seedable N-way K-shot episode sampling and the evaluation loop.

RNG contract
------------
Task ``t`` of a run draws from ``numpy.random.default_rng([seed, t])``
(PCG64 behind a SeedSequence), in a fixed order: first the N classes via
``Generator.choice(num_classes, N, replace=False)``, then, per chosen class
in draw order, K+Q record positions via ``Generator.choice(count, K+Q,
replace=False)``; the first K become support, the rest queries.  Episodes
are therefore a pure function of (seed, task index, dataset), identical
across serial and parallel runs.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .calibrate import CalibConfig, calibrate_support_set
from .classify import PredictMode, dc_style_calibrate, tukey_transform
from .errors import CapacityError, DegenerateInputError, P3dcError
from .store import BasePrototypeSet, FeatureDataset


@dataclass(frozen=True)
class Episode:
    """One N-way K-shot task.  Features keep dataset order within each draw;
    ``support_labels``/``query_labels`` are local labels 0..N-1 and
    ``class_map[label]`` recovers the original class id."""

    way: int
    shot: int
    queries_per_class: int
    support_features: np.ndarray
    support_labels: np.ndarray
    query_features: np.ndarray
    query_labels: np.ndarray
    class_map: tuple[int, ...]


@dataclass(frozen=True)
class EvalReport:
    per_task_accuracy: list[float]
    mean: float
    ci95_halfwidth: float
    calib_seconds_per_task: float
    classify_seconds_per_task: float
    config: dict

    def to_dict(self) -> dict:
        return {
            "version": f"p3dc-{__version__}",
            "config": self.config,
            "mean_accuracy": self.mean,
            "ci95_halfwidth": self.ci95_halfwidth,
            "calib_seconds_per_task": self.calib_seconds_per_task,
            "classify_seconds_per_task": self.classify_seconds_per_task,
            "per_task_accuracy": self.per_task_accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def confidence_interval(accs: list[float]) -> tuple[float, float]:
    """Mean and 95% halfwidth: 1.96 * sample std (n-1 denominator) / sqrt(T).
    A single task yields halfwidth 0 by convention."""
    arr = np.asarray(accs, dtype=np.float64)
    if arr.size == 0:
        raise CapacityError("no task accuracies to aggregate")
    if arr.size == 1 or np.all(arr == arr[0]):
        return float(arr[0]), 0.0
    return float(arr.mean()), float(1.96 * arr.std(ddof=1) / np.sqrt(arr.size))


def sample_episode(
    split: FeatureDataset, n: int, k: int, q: int, rng: np.random.Generator
) -> Episode:
    """Draw one episode; see the module docstring for the draw order."""
    classes = split.classes()
    if len(classes) < n:
        raise CapacityError(
            f"split '{split.split_name}' has {len(classes)} classes, "
            f"{n}-way episodes need {n - len(classes)} more"
        )
    chosen = rng.choice(len(classes), size=n, replace=False)

    sup_rows, qry_rows = [], []
    class_map = []
    for local, ci in enumerate(chosen.tolist()):
        cid = classes[ci]
        rows = split.class_index[cid]
        if len(rows) < k + q:
            raise CapacityError(
                f"class {cid} of split '{split.split_name}' has {len(rows)} records, "
                f"K+Q={k + q} needs {k + q - len(rows)} more"
            )
        sel = rng.choice(len(rows), size=k + q, replace=False)
        picked = rows[sel]
        sup_rows.append(picked[:k])
        qry_rows.append(picked[k:])
        class_map.append(cid)

    sup_idx = np.concatenate(sup_rows)
    qry_idx = np.concatenate(qry_rows)
    return Episode(
        way=n,
        shot=k,
        queries_per_class=q,
        support_features=split.features[sup_idx],
        support_labels=np.repeat(np.arange(n), k),
        query_features=split.features[qry_idx],
        query_labels=np.repeat(np.arange(n), q),
        class_map=tuple(class_map),
    )


# -- per-mode feature handling --------------------------------------------


def _normalize_rows(X: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError(
            f"{what} {int(np.nonzero(norms[:, 0] == 0.0)[0][0])} is the zero vector"
        )
    return X / norms


def _transform_support(
    episode: Episode, protos: BasePrototypeSet, mode: PredictMode
) -> np.ndarray:
    """Mode-transformed support features, one row per support sample."""
    X = episode.support_features.astype(np.float64)
    if mode.transform == "raw_nn":
        return X
    if mode.transform == "l2n":
        return _normalize_rows(X, "support")
    if mode.transform == "cl2n":
        return _normalize_rows(X - protos.global_mean.astype(np.float64), "support")
    if mode.transform == "dc_style":
        return np.stack([dc_style_calibrate(x, protos, mode.calib) for x in X])
    pairs = list(zip(episode.support_features, episode.support_labels.tolist()))
    calibrated = calibrate_support_set(pairs, protos, mode.calib)
    return np.stack([c.calibrated for c in calibrated])


def _transform_queries(
    episode: Episode, protos: BasePrototypeSet, mode: PredictMode
) -> np.ndarray:
    """Query-side transform.  Calibration never touches queries: they stay
    raw under l2n/p3dc (cosine scoring normalizes later), are centered under
    cl2n, and are power-transformed under dc_style to match the support
    space (as the distribution-calibration recipe does)."""
    Q = episode.query_features.astype(np.float64)
    if mode.transform == "cl2n":
        return _normalize_rows(Q - protos.global_mean.astype(np.float64), "query")
    if mode.transform == "dc_style":
        cfg = mode.calib
        return np.stack([tukey_transform(x, cfg.tukey_lambda, cfg.clamp_negative) for x in Q])
    return Q


def predict_queries(
    support: np.ndarray,
    support_labels: np.ndarray,
    queries: np.ndarray,
    mode: PredictMode,
) -> np.ndarray:
    """Vectorized nearest-prototype prediction for a batch of queries.

    Attentive prototypes are recomputed per query (they are query-
    conditioned).  Ties break toward the smaller local label.
    """
    norms = np.linalg.norm(queries, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError(
            f"query {int(np.nonzero(norms == 0.0)[0][0])} is the zero vector"
        )
    qbar = queries / norms[:, None]
    q_attn = qbar if mode.normalized_query_attention else queries

    way = int(support_labels.max()) + 1
    scores = np.empty((len(queries), way), dtype=np.float64)
    for label in range(way):
        S = support[support_labels == label]
        if mode.prototype == "average":
            p = S.mean(axis=0)
            pnorm = np.linalg.norm(p)
            if pnorm == 0.0:
                raise DegenerateInputError(f"prototype for local class {label} is zero")
            scores[:, label] = qbar @ (p / pnorm)
        else:
            logits = S @ q_attn.T                     # (K, n_queries)
            A = np.exp(logits - logits.max(axis=0))
            A /= A.sum(axis=0)
            P = A.T @ S                               # (n_queries, dim)
            pnorms = np.linalg.norm(P, axis=1)
            if np.any(pnorms == 0.0):
                raise DegenerateInputError(f"attentive prototype collapsed for class {label}")
            scores[:, label] = np.einsum("ij,ij->i", qbar, P / pnorms[:, None])
    return np.argmax(scores, axis=1)


def _run_task(
    novel: FeatureDataset,
    protos: BasePrototypeSet,
    mode: PredictMode,
    n: int,
    k: int,
    q: int,
    seed: int,
    task: int,
) -> tuple[float, float, float]:
    rng = np.random.default_rng([seed, task])
    episode = sample_episode(novel, n, k, q, rng)

    t0 = time.perf_counter()
    support = _transform_support(episode, protos, mode)
    t1 = time.perf_counter()
    queries = _transform_queries(episode, protos, mode)
    preds = predict_queries(support, episode.support_labels, queries, mode)
    t2 = time.perf_counter()

    acc = float(np.mean(preds == episode.query_labels))
    return acc, t1 - t0, t2 - t1


def evaluate(
    novel: FeatureDataset,
    protos: BasePrototypeSet,
    mode: PredictMode,
    n: int,
    k: int,
    q: int,
    tasks: int,
    seed: int,
    threads: int = 1,
) -> EvalReport:
    """Evaluate ``tasks`` episodes and aggregate accuracy, CI and timing.

    Per-task accuracies are a pure function of (seed, config, dataset) and
    independent of ``threads``.  A failing task aborts the run with its task
    index and seed attached.
    """
    if tasks < 1:
        raise CapacityError(f"tasks must be >= 1, got {tasks}")

    def run(task: int) -> tuple[float, float, float]:
        try:
            return _run_task(novel, protos, mode, n, k, q, seed, task)
        except P3dcError as e:
            raise type(e)(f"task {task} (seed {seed}): {e}") from e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(tasks)))
    else:
        results = [run(t) for t in range(tasks)]

    accs = [r[0] for r in results]
    mean, halfwidth = confidence_interval(accs)
    config = {
        "mode": mode.transform,
        "prototype": mode.prototype,
        "alpha": mode.calib.alpha if mode.calib else None,
        "beta": mode.calib.beta if mode.calib else None,
        "tukey_lambda": mode.calib.tukey_lambda if mode.calib else None,
        "m": mode.calib.m if mode.calib else None,
        "way": n,
        "shot": k,
        "queries": q,
        "tasks": tasks,
        "seed": seed,
        "split": novel.split_name,
    }
    return EvalReport(
        per_task_accuracy=accs,
        mean=mean,
        ci95_halfwidth=halfwidth,
        calib_seconds_per_task=float(np.mean([r[1] for r in results])),
        classify_seconds_per_task=float(np.mean([r[2] for r in results])),
        config=config,
    )

"""Validation grid sweep over the calibration mix (alpha, beta).

Every grid point is scored on the *same* episodes (shared seed and the
shared endpoint precomputation), so differences between points are due to
(alpha, beta) alone.  Ties for the best point prefer less calibration:
smallest alpha + beta, then smallest beta.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibrate import CalibConfig, CalibratedSupport, calibrate_support_set, recombine
from .classify import PredictMode
from .episodes import Episode, confidence_interval, predict_queries, sample_episode
from .errors import ConfigError, IOFailure
from .store import BasePrototypeSet, FeatureDataset


@dataclass(frozen=True)
class SweepGrid:
    """All (alpha, beta) lattice points with the given step and
    alpha + beta <= 1.  For step 0.1 that is 66 points."""

    step: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.step <= 1.0:
            raise ConfigError(f"step must be in (0, 1], got {self.step}")
        levels = round(1.0 / self.step)
        if abs(levels * self.step - 1.0) > 1e-9:
            raise ConfigError(f"step {self.step} must divide 1 evenly")

    @property
    def levels(self) -> int:
        return round(1.0 / self.step)

    @property
    def points(self) -> list[tuple[float, float]]:
        L = self.levels
        return [
            (round(i * self.step, 12), round(j * self.step, 12))
            for i in range(L + 1)
            for j in range(L + 1 - i)
        ]


@dataclass(frozen=True)
class SweepEntry:
    alpha: float
    beta: float
    accuracy: float
    ci95: float


@dataclass(frozen=True)
class SweepResult:
    entries: list[SweepEntry]
    best: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"alpha": e.alpha, "beta": e.beta, "accuracy": e.accuracy, "ci95": e.ci95}
                for e in self.entries
            ],
            "best": {"alpha": self.best[0], "beta": self.best[1]},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def select_best(entries: list[SweepEntry]) -> tuple[float, float]:
    """Highest accuracy; ties prefer the smallest alpha + beta, then the
    smallest beta."""
    if not entries:
        raise ConfigError("cannot select from an empty sweep")
    best = min(
        entries,
        key=lambda e: (-e.accuracy, round(e.alpha + e.beta, 9), e.beta),
    )
    return best.alpha, best.beta


def grid_sweep(
    validation: FeatureDataset,
    protos: BasePrototypeSet,
    grid: SweepGrid,
    n: int = 5,
    k: int = 1,
    q: int = 15,
    tasks: int = 500,
    seed: int = 0,
    prototype: str = "attentive",
    tukey_lambda: float = 0.5,
    m: int = 5,
    clamp_negative: bool = False,
    threads: int = 1,
) -> SweepResult:
    """Score every grid point on a shared episode set.

    Episodes are drawn exactly as ``evaluate`` draws them for the same seed,
    and the (alpha, beta)-independent calibration endpoints are computed
    once per episode, so a grid point's accuracy matches a standalone
    ``evaluate`` run at those coordinates.
    """
    base_cfg = CalibConfig(
        tukey_lambda=tukey_lambda, m=m, alpha=0.0, beta=0.0, clamp_negative=clamp_negative
    )
    mode = PredictMode(transform="p3dc", prototype=prototype, calib=base_cfg)

    episodes: list[Episode] = []
    endpoints: list[list[CalibratedSupport]] = []
    for t in range(tasks):
        rng = np.random.default_rng([seed, t])
        ep = sample_episode(validation, n, k, q, rng)
        episodes.append(ep)
        pairs = list(zip(ep.support_features, ep.support_labels.tolist()))
        endpoints.append(calibrate_support_set(pairs, protos, base_cfg))

    def score(point: tuple[float, float]) -> SweepEntry:
        alpha, beta = point
        accs = []
        for ep, cal in zip(episodes, endpoints):
            support = np.stack(recombine(cal, alpha, beta))
            preds = predict_queries(
                support, ep.support_labels, ep.query_features.astype(np.float64), mode
            )
            accs.append(float(np.mean(preds == ep.query_labels)))
        mean, ci = confidence_interval(accs)
        return SweepEntry(alpha=alpha, beta=beta, accuracy=mean, ci95=ci)

    points = grid.points
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(score, points))
    else:
        entries = [score(p) for p in points]

    return SweepResult(entries=entries, best=select_best(entries))


def emit_heatmap_csv(result: SweepResult, path: str | Path) -> None:
    """Write ``alpha,beta,accuracy,ci95`` rows at 4-decimal precision,
    sorted by (alpha, beta).  Re-emitting the same result is byte-identical."""
    lines = ["alpha,beta,accuracy,ci95"]
    for e in sorted(result.entries, key=lambda e: (e.alpha, e.beta)):
        lines.append(f"{e.alpha:.4f},{e.beta:.4f},{e.accuracy:.4f},{e.ci95:.4f}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IOFailure(f"cannot write heatmap CSV {path}: {e}") from e

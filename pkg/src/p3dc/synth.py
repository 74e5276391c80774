"""Synthetic feature stores with controllable base/novel geometry.

Base-class centroids sit on the positive orthant of a sphere of fixed
radius; novel and validation centroids are convex mixtures of a few base
centroids, so every unseen class genuinely shares structure with the
priors.  Samples are centroid plus isotropic Gaussian noise, optionally
absolute-valued so fractional power transforms stay in-domain.

Boundary bias: with probability ``boundary_bias`` a sample's noise is
redrawn until it lands in the outer shell of the class's noise
distribution (top 20% of centroid distance, the 0.8 chi quantile).  At
``boundary_bias=1`` every sample sits near its class boundary, the
failure mode calibration is meant to repair.

Everything derives from ``seed`` through fixed per-purpose streams
(``[seed, 0]`` centroids, ``[seed, 1..3]`` base/validation/novel samples),
so ``class_centroids`` reproduces the geometry without regenerating data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import chi2

from .errors import ConfigError
from .store import FeatureDataset

CENTROID_RADIUS = 4.0
SHELL_QUANTILE = 0.8


@dataclass(frozen=True)
class SynthConfig:
    dim: int = 64
    num_base_classes: int = 20
    num_novel_classes: int = 10
    samples_per_class: int = 100
    intra_class_stddev: float = 0.2
    novel_mix_k: int = 2
    boundary_bias: float = 0.0
    nonneg: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("dim", "num_base_classes", "num_novel_classes", "samples_per_class"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.intra_class_stddev <= 0:
            raise ConfigError(f"intra_class_stddev must be > 0, got {self.intra_class_stddev}")
        if not 1 <= self.novel_mix_k <= self.num_base_classes:
            raise ConfigError(
                f"novel_mix_k must be in [1, {self.num_base_classes}], got {self.novel_mix_k}"
            )
        if not 0.0 <= self.boundary_bias <= 1.0:
            raise ConfigError(f"boundary_bias must be in [0, 1], got {self.boundary_bias}")


# Ready-made configurations for the CLI and the test harness.
PRESETS: dict[str, SynthConfig] = {
    # Overlapping classes, every sample forced to the class boundary.
    "boundary-bias": SynthConfig(
        dim=64,
        num_base_classes=20,
        num_novel_classes=16,
        samples_per_class=60,
        intra_class_stddev=0.35,
        novel_mix_k=2,
        boundary_bias=1.0,
        nonneg=True,
        seed=2024,
    ),
    # Nearly noise-free, well-separated classes: any sane mode scores 1.0.
    "separable": SynthConfig(
        dim=32,
        num_base_classes=12,
        num_novel_classes=10,
        samples_per_class=40,
        intra_class_stddev=0.01,
        novel_mix_k=1,
        boundary_bias=0.0,
        nonneg=True,
        seed=7,
    ),
}


def _mixture_centroids(
    rng: np.random.Generator, base: np.ndarray, count: int, k: int
) -> np.ndarray:
    out = np.empty((count, base.shape[1]))
    for i in range(count):
        # redraw on (near-)duplicate centroids: with k=1 two classes can
        # otherwise land on the same base centroid and become inseparable.
        # Bounded retries; impossible requests (count > n_base at k=1)
        # fall back to duplicates rather than spinning.
        for _ in range(100):
            picks = rng.choice(len(base), size=k, replace=False)
            weights = rng.dirichlet(np.ones(k))
            candidate = weights @ base[picks]
            if i == 0 or np.linalg.norm(out[:i] - candidate, axis=1).min() > 1e-9:
                break
        out[i] = candidate
    return out


def class_centroids(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The exact (base, validation, novel) centroids ``generate`` uses."""
    rng = np.random.default_rng([cfg.seed, 0])
    dirs = np.abs(rng.standard_normal((cfg.num_base_classes, cfg.dim)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    base = CENTROID_RADIUS * dirs
    validation = _mixture_centroids(rng, base, cfg.num_novel_classes, cfg.novel_mix_k)
    novel = _mixture_centroids(rng, base, cfg.num_novel_classes, cfg.novel_mix_k)
    return base, validation, novel


def _sample_split(
    name: str,
    centroids: np.ndarray,
    cfg: SynthConfig,
    rng: np.random.Generator,
    biased: bool,
) -> FeatureDataset:
    n_classes = len(centroids)
    sigma = cfg.intra_class_stddev
    shell_radius = sigma * np.sqrt(chi2.ppf(SHELL_QUANTILE, cfg.dim))
    feats = np.empty((n_classes * cfg.samples_per_class, cfg.dim), dtype=np.float64)
    row = 0
    for c in range(n_classes):
        for _ in range(cfg.samples_per_class):
            in_shell = biased and rng.random() < cfg.boundary_bias
            noise = sigma * rng.standard_normal(cfg.dim)
            while in_shell and np.linalg.norm(noise) < shell_radius:
                noise = sigma * rng.standard_normal(cfg.dim)
            feats[row] = centroids[c] + noise
            row += 1
    if cfg.nonneg:
        np.abs(feats, out=feats)
    class_ids = np.repeat(np.arange(n_classes, dtype=np.uint32), cfg.samples_per_class)
    return FeatureDataset.from_records(name, cfg.dim, class_ids, feats.astype(np.float32))


def generate(cfg: SynthConfig) -> tuple[FeatureDataset, FeatureDataset, FeatureDataset]:
    """Build (base, validation, novel) splits.  Boundary bias applies only to
    the splits episodes are drawn from; the base split stays unbiased."""
    base_c, val_c, novel_c = class_centroids(cfg)
    base = _sample_split("base", base_c, cfg, np.random.default_rng([cfg.seed, 1]), False)
    validation = _sample_split(
        "validation", val_c, cfg, np.random.default_rng([cfg.seed, 2]), True
    )
    novel = _sample_split("novel", novel_c, cfg, np.random.default_rng([cfg.seed, 3]), True)
    return base, validation, novel


def preset_config(name: str, **overrides) -> SynthConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides)

import numpy as np
import pytest
from scipy.stats import chi2

from p3dc import (
    PredictMode,
    SynthConfig,
    compute_base_prototypes,
    evaluate,
    generate,
    load_dataset,
    write_dataset,
)
from p3dc.errors import ConfigError
from p3dc.synth import SHELL_QUANTILE, class_centroids, preset_config


class TestGenerate:
    def test_deterministic_per_seed(self):
        cfg = SynthConfig(dim=8, num_base_classes=4, num_novel_classes=3,
                          samples_per_class=6, boundary_bias=0.7, seed=42)
        a = generate(cfg)
        b = generate(cfg)
        for da, db in zip(a, b):
            assert np.array_equal(da.features, db.features)
            assert np.array_equal(da.class_ids, db.class_ids)

    def test_nonneg_output_has_no_negative_entries(self):
        cfg = SynthConfig(dim=8, num_base_classes=4, num_novel_classes=3,
                          samples_per_class=10, intra_class_stddev=2.0,
                          nonneg=True, seed=1)
        for ds in generate(cfg):
            assert ds.features.min() >= 0.0

    def test_round_trips_through_store(self, tmp_path):
        cfg = SynthConfig(dim=6, num_base_classes=3, num_novel_classes=2,
                          samples_per_class=4, seed=9)
        splits = generate(cfg)
        for ds in splits:
            write_dataset(ds, tmp_path, dataset_name="synthetic")
        for ds in splits:
            loaded = load_dataset(tmp_path, ds.split_name)
            assert np.array_equal(loaded.features, ds.features)
            assert np.array_equal(loaded.class_ids, ds.class_ids)

    def test_vanishing_noise_pins_samples_to_centroids(self):
        cfg = SynthConfig(dim=8, num_base_classes=5, num_novel_classes=4,
                          samples_per_class=6, intra_class_stddev=1e-12, seed=3)
        base, _, novel = generate(cfg)
        _, _, novel_c = class_centroids(cfg)
        for cid in novel.classes():
            feats = novel.features_for_class(cid)
            expect = np.abs(novel_c[cid]).astype(np.float32)
            assert np.array_equal(feats, np.tile(expect, (len(feats), 1)))
        # and the episodic task is trivially solvable by any mode
        protos = compute_base_prototypes(base)
        for mode in (PredictMode(transform="raw_nn", prototype="average"),
                      PredictMode(transform="l2n", prototype="attentive")):
            report = evaluate(novel, protos, mode, n=3, k=1, q=3, tasks=8, seed=0)
            assert report.mean == 1.0

    def test_identity_mixture_reuses_base_centroids(self):
        cfg = SynthConfig(dim=8, num_base_classes=6, num_novel_classes=4,
                          samples_per_class=3, novel_mix_k=1, seed=2)
        base_c, val_c, novel_c = class_centroids(cfg)
        for c in np.vstack([val_c, novel_c]):
            distances = np.linalg.norm(base_c - c, axis=1)
            assert distances.min() < 1e-9

    def test_mixture_centroids_are_distinct(self):
        cfg = SynthConfig(dim=8, num_base_classes=6, num_novel_classes=5,
                          samples_per_class=3, novel_mix_k=1, seed=2)
        _, val_c, novel_c = class_centroids(cfg)
        for block in (val_c, novel_c):
            dist = np.linalg.norm(block[:, None] - block[None, :], axis=2)
            assert dist[np.triu_indices(len(block), 1)].min() > 1e-9

    def test_empirical_means_concentrate_on_centroids(self):
        # default geometry minus the absolute-value fold, which would bias
        # near-zero coordinates; the Gaussian mean concentration is the claim
        cfg = SynthConfig(nonneg=False, seed=0)  # d=64, 20 base, 10 novel, 100/class
        base, _, _ = generate(cfg)
        base_c, _, _ = class_centroids(cfg)
        tol = 3 * cfg.intra_class_stddev / np.sqrt(cfg.samples_per_class)
        deviations = []
        for cid in base.classes():
            emp = base.features_for_class(cid).astype(np.float64).mean(axis=0)
            deviations.append(np.abs(emp - base_c[cid]))
        deviations = np.concatenate(deviations)
        assert (deviations <= tol).mean() >= 0.99  # ~99.7% expected at 3 sigma
        assert deviations.max() <= 5 * cfg.intra_class_stddev / np.sqrt(cfg.samples_per_class)

    def test_boundary_bias_forces_outer_shell(self):
        cfg = SynthConfig(dim=16, num_base_classes=4, num_novel_classes=3,
                          samples_per_class=30, boundary_bias=1.0,
                          nonneg=False, seed=6)
        _, _, novel = generate(cfg)
        _, _, novel_c = class_centroids(cfg)
        threshold = cfg.intra_class_stddev * np.sqrt(chi2.ppf(SHELL_QUANTILE, cfg.dim))
        for cid in novel.classes():
            d = np.linalg.norm(
                novel.features_for_class(cid).astype(np.float64) - novel_c[cid], axis=1
            )
            assert d.min() >= threshold

    def test_base_split_is_never_biased(self):
        cfg = SynthConfig(dim=16, num_base_classes=4, num_novel_classes=3,
                          samples_per_class=200, boundary_bias=1.0,
                          nonneg=False, seed=8)
        base, _, _ = generate(cfg)
        base_c, _, _ = class_centroids(cfg)
        threshold = cfg.intra_class_stddev * np.sqrt(chi2.ppf(SHELL_QUANTILE, cfg.dim))
        inside = 0
        for cid in base.classes():
            d = np.linalg.norm(
                base.features_for_class(cid).astype(np.float64) - base_c[cid], axis=1
            )
            inside += int((d < threshold).sum())
        # unbiased noise keeps roughly SHELL_QUANTILE of samples inside
        assert inside / len(base) > 0.5


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            SynthConfig(dim=0)
        with pytest.raises(ConfigError):
            SynthConfig(intra_class_stddev=0.0)
        with pytest.raises(ConfigError):
            SynthConfig(novel_mix_k=0)
        with pytest.raises(ConfigError):
            SynthConfig(num_base_classes=4, novel_mix_k=5)
        with pytest.raises(ConfigError):
            SynthConfig(boundary_bias=1.5)

    def test_presets(self):
        assert preset_config("separable").intra_class_stddev < 0.1
        biased = preset_config("boundary-bias", seed=123)
        assert biased.boundary_bias == 1.0
        assert biased.seed == 123
        with pytest.raises(ConfigError):
            preset_config("nope")

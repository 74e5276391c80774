import numpy as np
import pytest

from p3dc import (
    SynthConfig,
    compute_base_prototypes,
    generate,
    write_dataset,
)


@pytest.fixture(scope="session")
def small_synth():
    """In-memory synthetic splits sized for fast episodic tests."""
    cfg = SynthConfig(
        dim=16,
        num_base_classes=8,
        num_novel_classes=6,
        samples_per_class=24,
        intra_class_stddev=0.3,
        novel_mix_k=2,
        boundary_bias=0.5,
        nonneg=True,
        seed=11,
    )
    base, validation, novel = generate(cfg)
    return cfg, base, validation, novel


@pytest.fixture(scope="session")
def small_protos(small_synth):
    _, base, _, _ = small_synth
    return compute_base_prototypes(base)


@pytest.fixture(scope="session")
def separable_store(tmp_path_factory):
    """On-disk store where classes are separable to machine precision."""
    from p3dc.synth import preset_config

    cfg = preset_config("separable")
    store = tmp_path_factory.mktemp("separable-store")
    for ds in generate(cfg):
        write_dataset(ds, store, dataset_name="synthetic-separable")
    return store


def random_protoset(rng: np.random.Generator, n_b: int, dim: int):
    """A BasePrototypeSet with positive random prototypes (no store needed)."""
    from p3dc.store import BasePrototypeSet

    protos = rng.uniform(0.1, 2.0, size=(n_b, dim)).astype(np.float32)
    global_mean = protos.astype(np.float64).mean(axis=0).astype(np.float32)
    return BasePrototypeSet(
        class_ids=np.arange(n_b, dtype=np.uint32),
        prototypes=protos,
        global_mean=global_mean,
    )

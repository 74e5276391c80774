"""Feature backbones: a deterministic stub for tests and plumbing checks,
and a WideResNet-28-10 wrapper for real checkpoints (torch imported lazily,
only when that backbone is actually constructed)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class StubBackbone:
    """Checkpoint-free backbone: 8x8 RGB thumbnail pushed through a fixed
    random projection.  Deterministic in the image bytes; ``relu`` controls
    whether the output is clamped non-negative (real post-activation
    features are)."""

    def __init__(self, dim: int = 640, relu: bool = True):
        self.dim = dim
        self.relu = relu
        rng = np.random.default_rng(1234)
        self._projection = (
            rng.standard_normal((192, dim)).astype(np.float32) / np.sqrt(192.0)
        )

    def embed_batch(self, images: list[Image.Image]) -> np.ndarray:
        rows = np.empty((len(images), 192), dtype=np.float32)
        for i, img in enumerate(images):
            thumb = img.convert("RGB").resize((8, 8), Image.BILINEAR)
            rows[i] = np.asarray(thumb, dtype=np.float32).reshape(-1) / 255.0
        feats = rows @ self._projection
        if self.relu:
            np.maximum(feats, 0.0, out=feats)
        return feats


class WideResNetBackbone:
    """WideResNet-28-10 penultimate features (640-dim, post-activation).

    Expects a checkpoint holding the backbone's ``state_dict`` (directly,
    or under a ``state``/``state_dict`` key; ``module.`` prefixes are
    stripped).  Images are resized to ``image_size`` and normalized with
    the usual ImageNet statistics; no test-time augmentation.
    """

    dim = 640

    def __init__(self, checkpoint: str | Path, image_size: int = 84, device: str = "cpu"):
        import torch

        from ._wrn import WideResNet28_10

        self._torch = torch
        self.image_size = image_size
        self.device = torch.device(device)
        self.model = WideResNet28_10()

        state = torch.load(checkpoint, map_location="cpu")
        for key in ("state", "state_dict", "model"):
            if isinstance(state, dict) and key in state and isinstance(state[key], dict):
                state = state[key]
        state = {k.removeprefix("module."): v for k, v in state.items()}
        state = {k: v for k, v in state.items() if k in self.model.state_dict()}
        missing = set(self.model.state_dict()) - set(state)
        if missing:
            raise ValueError(
                f"checkpoint does not cover the WRN-28-10 backbone; missing "
                f"{len(missing)} tensors (e.g. {sorted(missing)[:3]})"
            )
        self.model.load_state_dict(state)
        self.model.to(self.device).eval()

        self._mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
        self._std = np.array([0.229, 0.224, 0.225], dtype=np.float32)

    def embed_batch(self, images: list[Image.Image]) -> np.ndarray:
        torch = self._torch
        batch = np.empty((len(images), self.image_size, self.image_size, 3), np.float32)
        for i, img in enumerate(images):
            resized = img.convert("RGB").resize(
                (self.image_size, self.image_size), Image.BILINEAR
            )
            batch[i] = np.asarray(resized, dtype=np.float32) / 255.0
        batch = (batch - self._mean) / self._std
        tensor = torch.from_numpy(batch.transpose(0, 3, 1, 2)).to(self.device)
        with torch.no_grad():
            feats = self.model.features(tensor)
        return feats.cpu().numpy().astype(np.float32)

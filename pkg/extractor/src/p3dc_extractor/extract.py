"""Walk an image dataset by split definition and dump backbone features.

The split definition file is JSON:

    {"base":       {"class_name": ["relative/img.jpg", ...], ...},
     "validation": {...},
     "novel":      {...}}

Classes must be disjoint across splits.  Within a split, class ids are
assigned densely in sorted-class-name order and each class's images are
processed in sorted-filename order, so stores are reproducible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .writer import write_manifest, write_split_binary

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractJob:
    dataset_root: Path
    splits_file: Path
    output: Path
    checkpoint: Path | None = None
    batch_size: int = 64
    on_error: str = "abort"  # or "skip": log unreadable images and go on
    dataset_name: str = "extracted"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.on_error not in ("abort", "skip"):
            raise ValueError(f"on_error must be 'abort' or 'skip', got {self.on_error!r}")


def load_split_spec(path: str | Path) -> dict[str, dict[str, list[str]]]:
    """Parse and validate a split definition file."""
    spec = json.loads(Path(path).read_text())
    if not isinstance(spec, dict) or not spec:
        raise ValueError(f"{path}: expected a non-empty split->classes mapping")
    seen: dict[str, str] = {}
    for split, classes in spec.items():
        if not isinstance(classes, dict) or not classes:
            raise ValueError(f"{path}: split '{split}' must map class names to image lists")
        for cls, images in classes.items():
            if cls in seen:
                raise ValueError(
                    f"{path}: class '{cls}' appears in both '{seen[cls]}' and '{split}'; "
                    "split classes must be disjoint"
                )
            seen[cls] = split
            if not images:
                raise ValueError(f"{path}: class '{cls}' has no images")
    return spec


def _load_images(paths: list[Path], on_error: str) -> tuple[list[Image.Image], int]:
    images, skipped = [], 0
    for p in paths:
        try:
            with Image.open(p) as img:
                images.append(img.convert("RGB"))
        except (OSError, UnidentifiedImageError) as e:
            if on_error == "abort":
                raise OSError(f"unreadable image {p}: {e}") from e
            log.warning("skipping unreadable image %s: %s", p, e)
            skipped += 1
    return images, skipped


def extract(job: ExtractJob, backbone) -> Path:
    """Run the backbone over every split and write a feature store.

    Returns the store directory.  The manifest's ``nonneg`` flags come from
    an empirical scan of the emitted features.
    """
    spec = load_split_spec(job.splits_file)
    job.output.mkdir(parents=True, exist_ok=True)

    split_entries: dict[str, dict] = {}
    total_skipped = 0
    for split in sorted(spec):
        classes = sorted(spec[split])
        feats_parts: list[np.ndarray] = []
        ids_parts: list[np.ndarray] = []
        for class_id, cls in enumerate(classes):
            paths = [job.dataset_root / rel for rel in sorted(spec[split][cls])]
            count = 0
            for start in range(0, len(paths), job.batch_size):
                images, skipped = _load_images(
                    paths[start:start + job.batch_size], job.on_error
                )
                total_skipped += skipped
                if not images:
                    continue
                feats_parts.append(backbone.embed_batch(images))
                count += len(images)
            ids_parts.append(np.full(count, class_id, dtype=np.uint32))
        features = (
            np.concatenate(feats_parts)
            if feats_parts
            else np.empty((0, backbone.dim), np.float32)
        )
        split_entries[split] = write_split_binary(
            job.output / f"{split}.bin",
            backbone.dim,
            np.concatenate(ids_parts),
            features,
        )

    write_manifest(job.output, job.dataset_name, backbone.dim, split_entries)
    if total_skipped:
        log.warning("skipped %d unreadable images in total", total_skipped)
    return job.output

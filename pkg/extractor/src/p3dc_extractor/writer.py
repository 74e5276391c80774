"""Standalone writer for the p3dc feature-store wire format.

Implements the published byte layout directly so this package stays
decoupled from the consumer library:

    manifest.json  {"format_version": 1, "dataset", "dim",
                    "splits": {name: {"file", "count", "num_classes", "nonneg"}},
                    "class_names": {id: name}}
    <split>.bin    little-endian: magic "P3DC" | u32 version=1 | u32 dim |
                   u64 count | count x (u32 class_id, dim x f32)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"P3DC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


def write_split_binary(
    path: Path, dim: int, class_ids: np.ndarray, features: np.ndarray
) -> dict:
    """Write one split file; returns its manifest entry."""
    class_ids = np.ascontiguousarray(class_ids, dtype="<u4")
    features = np.ascontiguousarray(features, dtype="<f4")
    count = len(class_ids)
    record = np.dtype([("class_id", "<u4"), ("feature", "<f4", (dim,))])
    records = np.empty(count, dtype=record)
    records["class_id"] = class_ids
    records["feature"] = features.reshape(count, dim)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, count))
        fh.write(records.tobytes())
    nonneg = bool(count == 0 or float(features.min()) >= 0.0)
    return {
        "file": path.name,
        "count": count,
        "num_classes": int(len(np.unique(class_ids))),
        "nonneg": nonneg,
    }


def write_manifest(
    store_dir: Path,
    dataset_name: str,
    dim: int,
    split_entries: dict[str, dict],
) -> None:
    # class_names is left out: ids are dense per split, so the store-level
    # optional name map cannot represent three splits unambiguously
    manifest = {
        "format_version": FORMAT_VERSION,
        "dataset": dataset_name,
        "dim": dim,
        "splits": split_entries,
    }
    path = store_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

"""Feature store: binary I/O, validation, and base-class statistics.

A store is a directory holding ``manifest.json`` plus one binary file per
split.  Binary layout (little-endian, no padding, no compression):

    magic  ``P3DC``      4 bytes
    version              u32  (currently 1)
    dim                  u32
    count                u64
    records              count x (u32 class_id, dim x f32)

Features are stored as 32-bit floats; all statistics here accumulate in
64-bit and are rounded back to 32-bit at rest.  Per-class means accumulate
in record-file order so results are run-to-run deterministic.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, IOFailure, SchemaError

MAGIC = b"P3DC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count

SPLIT_NAMES = ("base", "validation", "novel")


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("class_id", "<u4"), ("feature", "<f4", (dim,))])


@dataclass(frozen=True)
class FeatureDataset:
    """One split of labeled d-dimensional feature vectors.

    ``features`` is a read-only ``(count, dim)`` float32 array, ``class_ids``
    the parallel ``(count,)`` uint32 array.  ``class_index`` maps each
    class id to the record indices that carry it, in file order.
    """

    split_name: str
    dim: int
    class_ids: np.ndarray
    features: np.ndarray
    class_index: dict[int, np.ndarray] = field(repr=False)

    def __post_init__(self):
        self.class_ids.setflags(write=False)
        self.features.setflags(write=False)
        for idx in self.class_index.values():
            idx.setflags(write=False)

    @classmethod
    def from_records(cls, split_name: str, dim: int, class_ids, features) -> "FeatureDataset":
        class_ids = np.ascontiguousarray(class_ids, dtype=np.uint32)
        features = np.ascontiguousarray(features, dtype=np.float32).reshape(len(class_ids), dim)
        index: dict[int, list[int]] = {}
        for i, cid in enumerate(class_ids.tolist()):
            index.setdefault(cid, []).append(i)
        class_index = {cid: np.asarray(rows, dtype=np.int64) for cid, rows in index.items()}
        return cls(split_name, dim, class_ids, features, class_index)

    def __len__(self) -> int:
        return len(self.class_ids)

    @property
    def num_classes(self) -> int:
        return len(self.class_index)

    def classes(self) -> list[int]:
        return sorted(self.class_index)

    def features_for_class(self, class_id: int) -> np.ndarray:
        return self.features[self.class_index[class_id]]

    def is_nonneg(self) -> bool:
        return bool(len(self) == 0 or self.features.min() >= 0.0)


@dataclass(frozen=True)
class BasePrototypeSet:
    """Per-base-class mean vectors plus the global mean of all base records.

    ``prototypes`` is ``(n_b, dim)`` float32, rows ordered by ascending
    ``class_ids``; row position is the canonical base index used by the
    calibration ops.
    """

    class_ids: np.ndarray
    prototypes: np.ndarray
    global_mean: np.ndarray

    def __post_init__(self):
        self.class_ids.setflags(write=False)
        self.prototypes.setflags(write=False)
        self.global_mean.setflags(write=False)

    def __len__(self) -> int:
        return len(self.class_ids)

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]


def compute_base_prototypes(base: FeatureDataset) -> BasePrototypeSet:
    """Unweighted per-class means of the raw features, plus the global mean.

    Prototypes are computed from untransformed, unnormalized features.
    Raises ``DataError`` if the split is empty.
    """
    if len(base) == 0:
        raise DataError("cannot compute prototypes of an empty split")
    cids = base.classes()
    protos = np.empty((len(cids), base.dim), dtype=np.float32)
    for row, cid in enumerate(cids):
        feats = base.features_for_class(cid).astype(np.float64)
        protos[row] = feats.mean(axis=0).astype(np.float32)
    global_mean = base.features.astype(np.float64).mean(axis=0).astype(np.float32)
    return BasePrototypeSet(
        class_ids=np.asarray(cids, dtype=np.uint32),
        prototypes=protos,
        global_mean=global_mean,
    )


# -- manifest ------------------------------------------------------------


def load_manifest(store_dir: str | Path) -> dict:
    path = Path(store_dir) / "manifest.json"
    if not path.is_file():
        raise FormatError(f"missing manifest: {path}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"unparsable manifest {path}: {e}") from e
    for key in ("format_version", "dataset", "dim", "splits"):
        if key not in manifest:
            raise SchemaError(f"manifest {path} missing required key '{key}'")
    if manifest["format_version"] != FORMAT_VERSION:
        raise SchemaError(
            f"unsupported manifest format_version {manifest['format_version']!r}"
        )
    return manifest


def _write_manifest(store_dir: Path, manifest: dict) -> None:
    (store_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- binary I/O ----------------------------------------------------------


def load_dataset(store_dir: str | Path, split: str | None = None) -> FeatureDataset:
    """Load and validate one split from a store directory.

    ``split`` may be omitted when the manifest declares exactly one split.
    Raises ``FormatError`` (naming the byte offset) for corrupt binaries,
    ``SchemaError`` for manifest/binary disagreement and ``DataError`` for
    NaN/Inf entries or ``nonneg`` violations.
    """
    store_dir = Path(store_dir)
    manifest = load_manifest(store_dir)
    splits = manifest["splits"]
    if split is None:
        if len(splits) != 1:
            raise SchemaError(
                f"store declares splits {sorted(splits)}; specify which one to load"
            )
        split = next(iter(splits))
    if split not in splits:
        raise SchemaError(f"split '{split}' not in manifest (has {sorted(splits)})")
    entry = splits[split]
    dim = int(manifest["dim"])

    path = store_dir / entry["file"]
    if not path.is_file():
        raise FormatError(f"missing split file: {path}")
    raw = path.read_bytes()

    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(raw))
    magic, version, bin_dim, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported binary version {version}", offset=4)
    if bin_dim != dim:
        raise SchemaError(f"{path}: manifest dim={dim} but binary header dim={bin_dim}")
    if count != int(entry["count"]):
        raise SchemaError(
            f"{path}: manifest count={entry['count']} but binary header count={count}"
        )

    rec = _record_dtype(dim)
    payload = raw[_HEADER.size:]
    expected = count * rec.itemsize
    if len(payload) != expected:
        whole = len(payload) // rec.itemsize
        raise FormatError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected} "
            f"({count} records of {rec.itemsize} bytes)",
            offset=_HEADER.size + whole * rec.itemsize,
        )
    records = np.frombuffer(payload, dtype=rec)
    class_ids = records["class_id"].copy()
    features = records["feature"].reshape(count, dim).copy()

    bad = ~np.isfinite(features)
    if bad.any():
        row = int(np.nonzero(bad.any(axis=1))[0][0])
        raise DataError(f"{path}: non-finite feature entry in record {row}")
    if entry.get("nonneg", False) and count and features.min() < 0:
        row = int(np.nonzero((features < 0).any(axis=1))[0][0])
        raise DataError(
            f"{path}: manifest declares nonneg but record {row} has a negative entry"
        )

    dataset = FeatureDataset.from_records(split, dim, class_ids, features)
    declared = int(entry.get("num_classes", dataset.num_classes))
    if declared != dataset.num_classes:
        raise SchemaError(
            f"{path}: manifest num_classes={declared} but data holds {dataset.num_classes}"
        )
    return dataset


def write_dataset(
    dataset: FeatureDataset,
    store_dir: str | Path,
    dataset_name: str | None = None,
    class_names: dict[int, str] | None = None,
) -> Path:
    """Write one split into a store directory, creating or updating the manifest.

    Loading the written split reproduces ``dataset`` bit-exactly (identical
    f32 payload and class ids).  Returns the path of the binary file.
    """
    store_dir = Path(store_dir)
    try:
        store_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IOFailure(f"cannot create store directory {store_dir}: {e}") from e

    manifest_path = store_dir / "manifest.json"
    if manifest_path.is_file():
        manifest = load_manifest(store_dir)
        if int(manifest["dim"]) != dataset.dim:
            raise SchemaError(
                f"store dim={manifest['dim']} but dataset dim={dataset.dim}"
            )
    else:
        manifest = {
            "format_version": FORMAT_VERSION,
            "dataset": dataset_name or "unnamed",
            "dim": dataset.dim,
            "splits": {},
        }
    if dataset_name is not None:
        manifest["dataset"] = dataset_name
    if class_names is not None:
        names = dict(manifest.get("class_names", {}))
        names.update({str(k): v for k, v in class_names.items()})
        manifest["class_names"] = names

    rec = _record_dtype(dataset.dim)
    records = np.empty(len(dataset), dtype=rec)
    records["class_id"] = dataset.class_ids
    records["feature"] = dataset.features

    filename = f"{dataset.split_name}.bin"
    path = store_dir / filename
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dataset.dim, len(dataset)))
            fh.write(records.tobytes())
    except OSError as e:
        raise IOFailure(f"cannot write {path}: {e}") from e

    manifest["splits"][dataset.split_name] = {
        "file": filename,
        "count": len(dataset),
        "num_classes": dataset.num_classes,
        "nonneg": dataset.is_nonneg(),
    }
    _write_manifest(store_dir, manifest)
    return path

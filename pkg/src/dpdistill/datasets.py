"""Dataset ingestion and synthesis.

``load_idx`` reads the classic IDX image/label pair used by the MNIST-family
datasets; ``make_blob_task`` synthesizes a Gaussian-cluster classification
task that serves as the fast stand-in for image data in tests and CI.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import IdxFormatError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class IdxDataset:
    """Images scaled to [0, 1] with integer labels and a content digest."""

    images: np.ndarray  # [n, h, w] float32 in [0, 1]
    labels: np.ndarray  # [n] int64
    source_digest: str

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise ValueError("image pixels must lie in [0, 1]")

    @property
    def n(self) -> int:
        return int(self.images.shape[0])

    def flat_features(self) -> np.ndarray:
        return self.images.reshape(self.n, -1)


def _read_idx_payload(path: Path, expected_magic: int, ndim: int):
    data = path.read_bytes()
    if len(data) < 4 * (1 + ndim):
        raise IdxFormatError(f"{path}: not an IDX file (header truncated)")
    (magic,) = struct.unpack(">i", data[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: not an IDX file of the expected kind "
            f"(magic 0x{magic:08x}, expected 0x{expected_magic:08x})"
        )
    dims = struct.unpack(f">{ndim}i", data[4 : 4 * (1 + ndim)])
    if any(d < 0 for d in dims):
        raise IdxFormatError(f"{path}: negative dimension in header: {dims}")
    expected_bytes = 4 * (1 + ndim) + int(np.prod(dims))
    if len(data) != expected_bytes:
        raise IdxFormatError(
            f"{path}: payload size mismatch, expected {expected_bytes} bytes "
            f"but file has {len(data)}"
        )
    payload = np.frombuffer(data, dtype=np.uint8, offset=4 * (1 + ndim))
    return dims, payload.reshape(dims), data


def load_idx(path_images, path_labels) -> IdxDataset:
    """Parse an IDX image file plus its label file.

    Big-endian 32-bit magic (0x00000803 for images, 0x00000801 for labels),
    big-endian 32-bit dimension sizes, unsigned-byte payload. Pixels are
    divided by 255.
    """
    path_images, path_labels = Path(path_images), Path(path_labels)
    for p in (path_images, path_labels):
        if not p.exists():
            raise IdxFormatError(f"file not found: {p}")
    img_dims, img_payload, img_bytes = _read_idx_payload(
        path_images, IDX_IMAGE_MAGIC, ndim=3
    )
    lbl_dims, lbl_payload, lbl_bytes = _read_idx_payload(
        path_labels, IDX_LABEL_MAGIC, ndim=1
    )
    if img_dims[0] != lbl_dims[0]:
        raise IdxFormatError(
            f"{img_dims[0]} images but {lbl_dims[0]} labels"
        )
    digest = hashlib.sha256(img_bytes + lbl_bytes).hexdigest()
    return IdxDataset(
        images=(img_payload.astype(np.float32) / 255.0),
        labels=lbl_payload.astype(np.int64),
        source_digest=digest,
    )


def serialize_idx(dataset: IdxDataset) -> tuple[bytes, bytes]:
    """Re-encode a dataset as (image file bytes, label file bytes)."""
    n, h, w = dataset.images.shape
    pixels = np.round(dataset.images * 255.0).astype(np.uint8)
    img = struct.pack(">iiii", IDX_IMAGE_MAGIC, n, h, w) + pixels.tobytes()
    lbl = struct.pack(">ii", IDX_LABEL_MAGIC, n) + dataset.labels.astype(
        np.uint8
    ).tobytes()
    return img, lbl


def write_idx(dataset: IdxDataset, path_images, path_labels) -> None:
    img, lbl = serialize_idx(dataset)
    Path(path_images).write_bytes(img)
    Path(path_labels).write_bytes(lbl)


def make_blob_task(
    classes: int,
    dim: int,
    samples: int,
    seed: int,
    separation: float = 6.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian clusters with unit within-class spread.

    ``separation`` is the pairwise distance between cluster centers (the
    centers sit on mutually orthogonal directions whenever ``dim`` allows).
    Class counts are balanced up to rounding. Deterministic per seed.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if samples < 1:
        raise ValueError("need at least 1 sample")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if dim >= classes:
        q, _ = np.linalg.qr(rng.standard_normal((dim, classes)))
        directions = q.T  # orthonormal rows
    else:
        directions = rng.standard_normal((classes, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    centers = (separation / np.sqrt(2.0)) * directions

    counts = np.full(classes, samples // classes, dtype=np.int64)
    counts[: samples % classes] += 1
    labels = np.repeat(np.arange(classes), counts)
    features = centers[labels] + rng.standard_normal((samples, dim))
    order = rng.permutation(samples)
    return features[order].astype(np.float32), labels[order].astype(np.int64)


def split_train_test(
    features: np.ndarray, labels: np.ndarray, test_samples: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic tail split; the generator already shuffled the data."""
    if test_samples < 0 or test_samples >= len(features):
        raise ValueError(
            f"test_samples must be in [0, {len(features)}), got {test_samples}"
        )
    cut = len(features) - test_samples
    return features[:cut], labels[:cut], features[cut:], labels[cut:]


def make_task_data(cfg) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(train X, train y, test X, test y) for a config's task."""
    if cfg.task == "blob":
        features, labels = make_blob_task(
            cfg.classes,
            cfg.dim,
            cfg.train_samples + cfg.test_samples,
            cfg.seed,
            cfg.separation,
        )
        return split_train_test(features, labels, cfg.test_samples)
    if cfg.task == "idx":
        train = load_idx(cfg.idx_images, cfg.idx_labels)
        x_train = train.flat_features()
        if cfg.idx_test_images:
            test = load_idx(cfg.idx_test_images, cfg.idx_test_labels)
            return x_train, train.labels, test.flat_features(), test.labels
        return x_train, train.labels, x_train[:0], train.labels[:0]
    raise ValueError(f"unknown task {cfg.task!r}")

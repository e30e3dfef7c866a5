"""Datasets, IDX parsing and the labeled/unlabeled pool."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError
from .model import Batch

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        y = np.asarray(self.labels, dtype=np.int64).ravel()
        if X.shape[0] != y.shape[0]:
            raise ContractError("inputs and labels are not aligned")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ContractError("labels outside [0, num_classes)")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def as_batch(self) -> Batch:
        return Batch(self.inputs, self.labels)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.inputs[idx], self.labels[idx], self.num_classes, self.name)


def _read(path) -> bytes:
    return Path(path).read_bytes()


def parse_idx_images(buf: bytes) -> np.ndarray:
    if len(buf) < 16:
        raise FormatError("header", f"image file too short for header ({len(buf)} bytes)")
    magic, n, rows, cols = struct.unpack(">IIII", buf[:16])
    if magic != IMAGE_MAGIC:
        raise FormatError("magic", f"expected 0x{IMAGE_MAGIC:08x} for images, got 0x{magic:08x}")
    need = 16 + n * rows * cols
    if len(buf) < need:
        raise FormatError("data", f"truncated image data: need {need} bytes, have {len(buf)}")
    return np.frombuffer(buf, dtype=np.uint8, count=n * rows * cols, offset=16).reshape(n, rows * cols)


def parse_idx_labels(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise FormatError("header", f"label file too short for header ({len(buf)} bytes)")
    magic, n = struct.unpack(">II", buf[:8])
    if magic != LABEL_MAGIC:
        raise FormatError("magic", f"expected 0x{LABEL_MAGIC:08x} for labels, got 0x{magic:08x}")
    if len(buf) < 8 + n:
        raise FormatError("data", f"truncated label data: need {8 + n} bytes, have {len(buf)}")
    return np.frombuffer(buf, dtype=np.uint8, count=n, offset=8)


def load_idx(images_path, labels_path, num_classes: int = 10, name: str = "") -> Dataset:
    """Read an IDX image/label file pair; pixel bytes are scaled by 1/255."""
    pixels = parse_idx_images(_read(images_path))
    labels = parse_idx_labels(_read(labels_path))
    if pixels.shape[0] != labels.shape[0]:
        raise FormatError(
            "count", f"{pixels.shape[0]} images but {labels.shape[0]} labels"
        )
    if labels.size and labels.max() >= num_classes:
        raise FormatError("labels", f"label {labels.max()} >= num_classes {num_classes}")
    return Dataset(pixels.astype(np.float64) / 255.0, labels, num_classes, name or Path(images_path).name)


def idx_image_bytes(pixels: np.ndarray, rows: int, cols: int) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(-1, rows * cols)
    return struct.pack(">IIII", IMAGE_MAGIC, pixels.shape[0], rows, cols) + pixels.tobytes()


def idx_label_bytes(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8).ravel()
    return struct.pack(">II", LABEL_MAGIC, labels.size) + labels.tobytes()


def write_idx(images_path, labels_path, pixels, labels, rows: int, cols: int) -> None:
    Path(images_path).write_bytes(idx_image_bytes(pixels, rows, cols))
    Path(labels_path).write_bytes(idx_label_bytes(labels))


def make_blobs(n: int, num_classes: int, dim: int, spread: float, seed: int, name: str = "blobs") -> Dataset:
    """Isotropic Gaussian classes around mutually orthogonal unit centers.

    Features are min-max rescaled per column into [0, 1].
    """
    if n < 1 or num_classes < 2 or dim < 1 or spread < 0:
        raise ContractError("make_blobs needs n >= 1, num_classes >= 2, dim >= 1, spread >= 0")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, max(dim, num_classes))))
    if num_classes <= dim:
        centers = q.T[:num_classes]
    else:
        centers = rng.standard_normal((num_classes, dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.permutation(np.arange(n) % num_classes)
    X = centers[labels] + spread * rng.standard_normal((n, dim))
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    X = np.divide(X - lo, span, out=np.zeros_like(X), where=span > 0)
    return Dataset(np.clip(X, 0.0, 1.0), labels, num_classes, name)


def make_blobs_split(n_train: int, n_test: int, num_classes: int, dim: int, spread: float, seed: int):
    """Train/test blobs drawn from one generator call so both share the rescaling."""
    full = make_blobs(n_train + n_test, num_classes, dim, spread, seed)
    return full.subset(np.arange(n_train)), full.subset(np.arange(n_train, n_train + n_test))


@dataclass(eq=False)
class LabelPool:
    base: Dataset
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    test: Dataset
    adversarial_train_store: list = field(default_factory=list)

    @property
    def unlabeled_inputs(self) -> np.ndarray:
        return self.base.inputs[self.unlabeled_idx]

    def labeled_batch(self) -> Batch:
        return Batch(self.base.inputs[self.labeled_idx], self.base.labels[self.labeled_idx])

    def adversarial_batch(self):
        if not self.adversarial_train_store:
            return None
        return Batch.concat(*self.adversarial_train_store)

    def check_partition(self) -> bool:
        lab = set(self.labeled_idx.tolist())
        unl = set(self.unlabeled_idx.tolist())
        return (not lab & unl and len(lab) == self.labeled_idx.size
                and len(unl) == self.unlabeled_idx.size
                and lab | unl == set(range(len(self.base))))

    def copy(self) -> "LabelPool":
        return LabelPool(self.base, self.labeled_idx.copy(), self.unlabeled_idx.copy(),
                         self.test, list(self.adversarial_train_store))


def split_pool(train: Dataset, test: Dataset, initial_labeled: int, seed: int) -> LabelPool:
    """Seeded initial labeled set, class-stratified when the count divides evenly."""
    n = len(train)
    if not 0 <= initial_labeled <= n:
        raise ContractError(f"initial_labeled={initial_labeled} outside [0, {n}]")
    rng = np.random.default_rng(seed)
    k = train.num_classes
    per_class = initial_labeled // k
    by_class = [np.flatnonzero(train.labels == c) for c in range(k)]
    if initial_labeled % k == 0 and all(len(ix) >= per_class for ix in by_class):
        chosen = np.concatenate([rng.choice(ix, per_class, replace=False) for ix in by_class])
    else:
        chosen = rng.choice(n, initial_labeled, replace=False)
    chosen = np.sort(chosen.astype(np.int64))
    mask = np.ones(n, dtype=bool)
    mask[chosen] = False
    return LabelPool(train, chosen, np.flatnonzero(mask).astype(np.int64), test)


def label_oracle(pool: LabelPool, indices) -> Batch:
    """Move base indices from the unlabeled to the labeled set and reveal their labels."""
    indices = np.asarray(indices, dtype=np.int64).ravel()
    if np.unique(indices).size != indices.size:
        raise ContractError("duplicate indices in labeling request")
    present = np.isin(indices, pool.unlabeled_idx)
    if not present.all():
        raise ContractError(f"indices not in the unlabeled pool: {indices[~present].tolist()}")
    pool.unlabeled_idx = pool.unlabeled_idx[~np.isin(pool.unlabeled_idx, indices)]
    pool.labeled_idx = np.concatenate([pool.labeled_idx, indices])
    return Batch(pool.base.inputs[indices], pool.base.labels[indices])

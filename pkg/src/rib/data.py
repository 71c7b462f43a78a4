"""Datasets, supersamples and selector masks.

A supersample holds ``n`` pairs of instances (``left[i]``, ``right[i]``); a
selector mask with one fair bit per pair picks which element of each pair is
trained on, the other one becoming held-out data. All randomized functions
are pure functions of their inputs and seed.
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .rng import stream

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError(f"{labels.shape[0]} labels for {features.shape[0]} rows")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite values")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def take(self, index):
        index = np.asarray(index, dtype=np.int64)
        return LabeledDataset(self.features[index], self.labels[index], self.num_classes)


@dataclass(frozen=True)
class GhostSet:
    """Held-out instances whose labels are never used."""

    features: np.ndarray

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @classmethod
    def from_dataset(cls, ds):
        return cls(ds.features)


@dataclass(frozen=True)
class Supersample:
    left: LabeledDataset
    right: LabeledDataset
    left_index: np.ndarray = None  # rows of the pool, when drawn from one
    right_index: np.ndarray = None

    def __post_init__(self):
        if len(self.left) != len(self.right) or self.left.dim != self.right.dim:
            raise ValueError("left and right halves must have equal size and width")
        if self.left.num_classes != self.right.num_classes:
            raise ValueError("left and right halves disagree on num_classes")

    def __len__(self):
        return len(self.left)

    def prefix(self, n):
        """The first ``n`` pairs; nested across ``n`` by construction."""
        if n > len(self):
            raise ValueError(f"supersample has {len(self)} pairs, asked for {n}")
        idx = np.arange(n)
        return Supersample(
            self.left.take(idx),
            self.right.take(idx),
            None if self.left_index is None else self.left_index[:n],
            None if self.right_index is None else self.right_index[:n],
        )


@dataclass(frozen=True)
class SelectorMask:
    bits: np.ndarray
    seed: int = 0

    def __len__(self):
        return len(self.bits)

    def flipped(self):
        return SelectorMask(1 - self.bits, self.seed)


def _read_header(buf, path, magic, ndims):
    need = 4 * (1 + ndims)
    if len(buf) < need:
        raise FormatError(f"{path}: truncated header at byte offset {len(buf)} (need {need})")
    (got,) = struct.unpack_from(">I", buf, 0)
    if got != magic:
        raise FormatError(f"{path}: bad magic 0x{got:08x} at byte offset 0, expected 0x{magic:08x}")
    return struct.unpack_from(f">{ndims}I", buf, 4), need


def load_idx(image_path, label_path, num_classes=10):
    """Load an IDX image/label file pair; pixel bytes are scaled to [0, 1]."""
    with open(image_path, "rb") as f:
        ibuf = f.read()
    with open(label_path, "rb") as f:
        lbuf = f.read()
    (count, rows, cols), off = _read_header(ibuf, image_path, IDX_IMAGES_MAGIC, 3)
    expected = off + count * rows * cols
    if len(ibuf) < expected:
        raise FormatError(
            f"{image_path}: truncated pixel data at byte offset {len(ibuf)}, expected {expected} bytes"
        )
    (lcount,), loff = _read_header(lbuf, label_path, IDX_LABELS_MAGIC, 1)
    if lcount != count:
        raise FormatError(
            f"{label_path}: label count {lcount} at byte offset 4 does not match image count {count}"
        )
    if len(lbuf) < loff + lcount:
        raise FormatError(
            f"{label_path}: truncated label data at byte offset {len(lbuf)}, expected {loff + lcount} bytes"
        )
    pixels = np.frombuffer(ibuf, dtype=np.uint8, count=count * rows * cols, offset=off)
    labels = np.frombuffer(lbuf, dtype=np.uint8, count=lcount, offset=loff)
    if lcount and labels.max() >= num_classes:
        raise FormatError(f"{label_path}: label {labels.max()} outside [0, {num_classes})")
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return LabeledDataset(features, labels.astype(np.int64), num_classes)


def write_idx(image_path, label_path, images, labels):
    """Write uint8 ``images`` of shape (count, rows, cols) and their labels as IDX."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ValueError("images must be (count, rows, cols) with one label per image")
    with open(image_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(label_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def save_csv(ds, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"f{j}" for j in range(ds.dim)] + ["label"])
        for row, label in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def load_csv(path, num_classes=None):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not header or header[-1] != "label":
            raise FormatError(f"{path}: header must end with a 'label' column")
        rows = [r for r in reader if r]
    features = np.array([[float(v) for v in r[:-1]] for r in rows], dtype=np.float64)
    features = features.reshape(len(rows), len(header) - 1)
    labels = np.array([int(r[-1]) for r in rows], dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 1
    return LabeledDataset(features, labels, num_classes)


def gaussian_mixture(dim, num_classes, n, seed, means=None, scale=1.0, label_noise_rate=0.0,
                     separation=2.0):
    """Class-balanced isotropic Gaussian clusters with optional label noise.

    When ``means`` is omitted, class means are drawn once from the seed's
    stream and rescaled to norm ``separation``. A ``label_noise_rate``
    fraction of rows have their label resampled uniformly over all classes
    (so a resampled label may coincide with the true one).
    """
    if num_classes < 2 or dim < 1:
        raise ValueError("need dim >= 1 and num_classes >= 2")
    if n < num_classes:
        raise ValueError(f"n={n} is smaller than num_classes={num_classes}")
    if not 0.0 <= label_noise_rate <= 1.0:
        raise ValueError("label_noise_rate must lie in [0, 1]")
    if scale <= 0:
        raise ValueError("scale must be positive")
    if means is None:
        raw = stream(seed, "mixture-means").standard_normal((num_classes, dim))
        means = separation * raw / np.linalg.norm(raw, axis=1, keepdims=True)
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (num_classes, dim):
        raise ValueError(f"means must have shape ({num_classes}, {dim}), got {means.shape}")
    rng = stream(seed, "mixture-draws")
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    features = means[labels] + scale * rng.standard_normal((n, dim))
    noisy = rng.random(n) < label_noise_rate
    labels = labels.copy()
    labels[noisy] = rng.integers(0, num_classes, size=int(noisy.sum()))
    return LabeledDataset(features, labels, num_classes)


def _permutation(n, seed, purpose):
    return stream(seed, purpose).permutation(n)


def subsample(ds, n, seed):
    """``n`` rows without replacement; smaller ``n`` under one seed gives a prefix."""
    if not 0 <= n <= len(ds):
        raise ValueError(f"cannot draw {n} rows from a dataset of {len(ds)}")
    return ds.take(_permutation(len(ds), seed, "subsample")[:n])


def make_supersample(pool, n, seed):
    """Draw ``2n`` distinct pool rows: the first ``n`` become left, the next ``n`` right."""
    if n < 1 or 2 * n > len(pool):
        raise ValueError(f"pool of {len(pool)} rows cannot supply 2*{n} rows")
    perm = _permutation(len(pool), seed, "supersample")
    li, ri = perm[:n], perm[n : 2 * n]
    return Supersample(pool.take(li), pool.take(ri), li, ri)


def draw_selector(n, seed):
    if n < 1:
        raise ValueError("selector length must be at least 1")
    bits = stream(seed, "selector").integers(0, 2, size=n, dtype=np.int64)
    return SelectorMask(bits, int(seed))


def select_train(ss, u):
    """Split a supersample into (train, heldout) according to the selector bits."""
    if len(u) != len(ss):
        raise ValueError(f"selector of length {len(u)} for {len(ss)} pairs")
    pick = np.asarray(u.bits, dtype=bool)[:, None]
    train = np.where(pick, ss.right.features, ss.left.features)
    held = np.where(pick, ss.left.features, ss.right.features)
    ytrain = np.where(pick[:, 0], ss.right.labels, ss.left.labels)
    yheld = np.where(pick[:, 0], ss.left.labels, ss.right.labels)
    k = ss.left.num_classes
    return LabeledDataset(train, ytrain, k), LabeledDataset(held, yheld, k)


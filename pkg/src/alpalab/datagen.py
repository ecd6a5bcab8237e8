"""Synthetic long-tailed datasets, CSV ingestion, and stratified splitting.

Randomness comes from ``numpy.random.Generator(PCG64(seed))`` everywhere, so
every output here is a pure function of its arguments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np


class Decay(str, Enum):
    EXPONENTIAL = "exponential"
    STEP = "step"


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if y.shape != (x.shape[0],):
            raise ValueError("one label per feature row is required")
        if np.any(np.isnan(x)):
            raise ValueError("features contain NaN")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dims(self) -> int:
        return self.features.shape[1]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes)

    def onehot(self) -> np.ndarray:
        out = np.zeros((len(self), self.num_classes))
        out[np.arange(len(self)), self.labels] = 1.0
        return out


@dataclass(frozen=True)
class LongTailProfile:
    num_classes: int = 10
    n_max: int = 2000
    imbalance_ratio: float = 50.0
    decay: Decay = Decay.EXPONENTIAL
    dims: int = 16
    cluster_separation: float = 3.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "decay", Decay(self.decay))
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.n_max < self.num_classes:
            raise ValueError("n_max must be >= num_classes")
        if self.imbalance_ratio < 1:
            raise ValueError("imbalance_ratio must be >= 1")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.cluster_separation <= 0 or self.noise_sigma <= 0:
            raise ValueError("cluster_separation and noise_sigma must be > 0")


def class_counts_for(profile: LongTailProfile) -> np.ndarray:
    """Per-class sample counts, head class first.

    Exponential: ``round(n_max * rho^(-k/(K-1)))``. Step: the first half of
    the classes (rounded up) get ``n_max``, the rest ``round(n_max / rho)``.
    """
    k = np.arange(profile.num_classes)
    rho = profile.imbalance_ratio
    if profile.decay is Decay.EXPONENTIAL:
        raw = profile.n_max * rho ** (-k / (profile.num_classes - 1))
    else:
        head = (profile.num_classes + 1) // 2
        raw = np.where(k < head, profile.n_max, profile.n_max / rho)
    # round half away from zero so the documented counts do not depend on banker's rounding
    counts = np.floor(raw + 0.5).astype(np.int64)
    if counts.min() < 1:
        raise ValueError("ratio too large for n_max: smallest class rounds to 0 samples")
    return counts


def _cluster_centers(rng: np.random.Generator, k: int, dims: int, sep: float) -> np.ndarray:
    if dims >= k:
        # orthonormal directions scaled so every pair sits exactly `sep` apart
        basis, _ = np.linalg.qr(rng.standard_normal((dims, k)))
        return basis.T * (sep / np.sqrt(2.0))
    centers: list[np.ndarray] = []
    half = sep * k
    for _ in range(100_000):
        c = rng.uniform(-half, half, size=dims)
        if all(np.linalg.norm(c - o) >= sep for o in centers):
            centers.append(c)
            if len(centers) == k:
                return np.stack(centers)
    raise RuntimeError("could not place cluster centers; increase dims")


def generate(profile: LongTailProfile) -> LabeledDataset:
    """Draw an isotropic Gaussian blob per class with long-tailed class sizes."""
    counts = class_counts_for(profile)
    rng = np.random.Generator(np.random.PCG64(profile.seed))
    centers = _cluster_centers(rng, profile.num_classes, profile.dims, profile.cluster_separation)
    xs, ys = [], []
    for k, n in enumerate(counts):
        xs.append(centers[k] + profile.noise_sigma * rng.standard_normal((int(n), profile.dims)))
        ys.append(np.full(int(n), k, dtype=np.int64))
    return LabeledDataset(np.concatenate(xs), np.concatenate(ys), profile.num_classes)


def imbalance_ratio(counts) -> float:
    counts = np.asarray(counts)
    counts = counts[counts > 0]
    return float(counts.max() / counts.min())


# --- CSV ----------------------------------------------------------------------


def save_csv(ds: LabeledDataset, path) -> None:
    """Write ``f0,...,f{d-1},label`` with features in shortest round-trip form."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(ds.dims)] + ["label"])
        for row, lab in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def load_csv(path) -> LabeledDataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if not header or header[-1] != "label":
        raise ValueError(f"{path}:1: header must end with 'label'")
    width = len(header)
    feats, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        try:
            feats.append([float(v) for v in row[:-1]])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad feature value ({exc})") from None
        try:
            lab = int(row[-1])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: label {row[-1]!r} is not an integer") from None
        if lab < 0:
            raise ValueError(f"{path}:{lineno}: label must be non-negative")
        labels.append(lab)
    if not labels:
        raise ValueError(f"{path}: no data rows")
    x = np.asarray(feats, dtype=np.float64).reshape(len(labels), width - 1)
    y = np.asarray(labels, dtype=np.int64)
    return LabeledDataset(x, y, int(y.max()) + 1)


# --- splitting ----------------------------------------------------------------


def _class_indices(ds: LabeledDataset):
    return [np.flatnonzero(ds.labels == k) for k in range(ds.num_classes)]


def stratified_split_indices(ds: LabeledDataset, train_fraction: float = 0.8, seed: int = 0):
    """Index arrays ``(train, test)``; each class contributes ``round(f * n_k)`` to train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))
    train, test = [], []
    for k, idx in enumerate(_class_indices(ds)):
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise ValueError(f"class too small to split: class {k} has {idx.size} sample")
        n_train = int(np.floor(train_fraction * idx.size + 0.5))
        n_train = min(max(n_train, 1), idx.size - 1)
        perm = rng.permutation(idx)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(ds: LabeledDataset, train_fraction: float = 0.8, seed: int = 0):
    tr, te = stratified_split_indices(ds, train_fraction, seed)
    return ds.subset(tr), ds.subset(te)


def kfold_indices(ds: LabeledDataset, k: int = 5, seed: int = 0):
    """Stratified k-fold: list of ``(train_idx, val_idx)``.

    Each class is shuffled and cut into ``k`` chunks whose sizes differ by at
    most one; fold ``i`` validates on chunk ``i`` of every class.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    chunks_per_class = []
    for c, idx in enumerate(_class_indices(ds)):
        if idx.size == 0:
            continue
        if idx.size < k:
            raise ValueError(f"class {c} has {idx.size} samples, fewer than k={k}")
        chunks_per_class.append(np.array_split(rng.permutation(idx), k))
    folds = []
    all_idx = np.arange(len(ds))
    for i in range(k):
        val = np.sort(np.concatenate([chunks[i] for chunks in chunks_per_class]))
        train = np.setdiff1d(all_idx, val, assume_unique=True)
        folds.append((train, val))
    return folds


def kfold(ds: LabeledDataset, k: int = 5, seed: int = 0):
    return [(ds.subset(tr), ds.subset(va)) for tr, va in kfold_indices(ds, k, seed)]

"""Datasets: synthetic generators, CSV ingestion, PCA and stratified splits."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Dataset",
    "PCAModel",
    "DataError",
    "gen_xor",
    "gen_circles",
    "gen_moons",
    "gen_three_class",
    "load_csv",
    "save_csv",
    "pca_fit",
    "pca_transform",
    "stratified_split",
    "standardize",
]

logger = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``x`` (n, k), 0-based integer ``labels`` and class count."""

    x: np.ndarray
    labels: np.ndarray
    classes: int = 0
    label_names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            x = np.zeros((0, 0)) if x.size == 0 else np.atleast_2d(x)
        labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if x.shape[0] != labels.size:
            raise DataError(f"{x.shape[0]} rows but {labels.size} labels")
        classes = self.classes or (int(labels.max()) + 1 if labels.size else 0)
        if labels.size and (labels.min() < 0 or labels.max() >= classes):
            raise DataError(f"labels must lie in [0, {classes})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "classes", classes)

    def __len__(self):
        return self.labels.size

    @property
    def k(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.labels[idx], self.classes, self.label_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.classes)


@dataclass(frozen=True)
class PCAModel:
    """Principal axes of standardized features.

    ``components`` rows are orthonormal and sorted by decreasing
    ``explained_variance``.
    """

    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "PCAModel":
        return cls(**{k: np.asarray(v, dtype=float) for k, v in data.items()})


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _balanced_labels(n: int, classes: int, rng) -> np.ndarray:
    labels = np.arange(n) % classes
    return labels[rng.permutation(n)]


def gen_xor(n: int, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Four jittered clusters at ``(+-0.25, +-0.25)`` labeled by XOR of signs.

    Label 0 when both coordinates of the cluster center share a sign.
    Cluster sizes differ by at most one.
    """
    if n < 4:
        raise DataError("gen_xor needs n >= 4")
    if noise >= 0.25:
        warnings.warn("noise >= 0.25 lets the XOR quadrants overlap", stacklevel=2)
    rng = _rng(seed)
    quadrant = _balanced_labels(n, 4, rng)
    centers = np.array([[0.25, 0.25], [-0.25, 0.25], [-0.25, -0.25], [0.25, -0.25]])
    c = centers[quadrant]
    x = c + rng.uniform(-noise, noise, size=(n, 2))
    labels = (c[:, 0] * c[:, 1] < 0).astype(int)
    return Dataset(x, labels, 2)


def _uniform_disk(rng, n, r_lo, r_hi):
    r = np.sqrt(rng.uniform(r_lo**2, r_hi**2, size=n))
    phi = rng.uniform(0, 2 * np.pi, size=n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def gen_circles(n: int, r_inner: float = 0.25, r_gap: float = 0.1, r_outer: float = 0.5,
                seed: int = 0) -> Dataset:
    """Class 0 uniform on a disk, class 1 uniform on a surrounding annulus."""
    if not 0 < r_inner < r_inner + r_gap < r_outer:
        raise DataError("need 0 < r_inner < r_inner + r_gap < r_outer")
    rng = _rng(seed)
    labels = _balanced_labels(n, 2, rng)
    x = np.empty((n, 2))
    inner = labels == 0
    x[inner] = _uniform_disk(rng, int(inner.sum()), 0.0, r_inner)
    x[~inner] = _uniform_disk(rng, int((~inner).sum()), r_inner + r_gap, r_outer)
    return Dataset(x, labels, 2)


def moons_raw(n: int, noise: float = 0.0, seed: int = 0) -> Dataset:
    """Two interleaved half circles before rescaling."""
    if n < 2:
        raise DataError("gen_moons needs n >= 2")
    rng = _rng(seed)
    labels = _balanced_labels(n, 2, rng)
    t = rng.uniform(0, np.pi, size=n)
    x = np.where(
        (labels == 0)[:, None],
        np.column_stack([np.cos(t), np.sin(t)]),
        np.column_stack([1 - np.cos(t), 0.5 - np.sin(t)]),
    )
    if noise > 0:
        x = x + rng.normal(0, noise, size=x.shape)
    return Dataset(x, labels, 2)


def gen_moons(n: int, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Standard two-moons data rescaled into ``[-1, 1]^2``."""
    raw = moons_raw(n, noise, seed)
    lo = raw.x.min(axis=0)
    hi = raw.x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    x = 2 * (raw.x - lo) / span - 1
    return Dataset(x, raw.labels, 2)


def gen_three_class(n: int, margin: float = 0.05, seed: int = 0) -> Dataset:
    """3x3 grid of square clusters in ``[-0.5, 0.5]^2`` with three classes.

    Cell ``(row, col)`` gets label ``(row + col) % 3``, so every class holds
    three cells arranged along anti-diagonals and no class fills a
    half-plane.  ``margin`` is the empty gap between neighbouring cells.
    """
    if n < 9:
        raise DataError("gen_three_class needs n >= 9")
    if not 0 <= margin <= 0.1:
        raise DataError("margin must lie in [0, 0.1]")
    rng = _rng(seed)
    cell = _balanced_labels(n, 9, rng)
    row, col = cell // 3, cell % 3
    width = 1.0 / 3.0
    half = (width - margin) / 2
    centers = -0.5 + width * (np.column_stack([col, row]) + 0.5)
    x = centers + rng.uniform(-half, half, size=(n, 2))
    return Dataset(x, (row + col) % 3, 3)


def load_csv(path, feature_columns: Sequence[str] | None = None,
             label_column: str = "label") -> Dataset:
    """Read a headed, comma-separated file.

    ``feature_columns`` defaults to every column except ``label_column``.
    String labels are mapped to 0-based indices in first-appearance order
    (``Dataset.label_names``); integer-looking labels are used as given
    when they already form a 0-based range.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    if label_column not in header:
        raise DataError(f"{path}: missing label column {label_column!r}")
    if feature_columns is None:
        feature_columns = [h for h in header if h != label_column]
    missing = [c for c in feature_columns if c not in header]
    if missing:
        raise DataError(f"{path}: missing feature column(s) {missing}")
    fidx = [header.index(c) for c in feature_columns]
    lidx = header.index(label_column)
    x = np.empty((len(rows), len(fidx)))
    raw_labels = []
    for r, row in enumerate(rows):
        # row numbers count the header as row 1
        if len(row) != len(header):
            raise DataError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        for j, c in enumerate(fidx):
            try:
                x[r, j] = float(row[c])
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {row[c]!r} at row {r + 2}, column {header[c]!r}"
                ) from None
        raw_labels.append(row[lidx].strip())
    names = list(dict.fromkeys(raw_labels))
    if all(s.lstrip("-").isdigit() for s in names) and sorted(int(s) for s in names) == list(range(len(names))):
        labels = np.array([int(s) for s in raw_labels])
        names = [str(i) for i in range(len(names))]
    else:
        lookup = {s: i for i, s in enumerate(names)}
        labels = np.array([lookup[s] for s in raw_labels])
        logger.info("label mapping for %s: %s", path, lookup)
    return Dataset(x, labels, len(names), tuple(names))


def save_csv(data: Dataset, path) -> None:
    """Write ``x1..xk,label`` with full double precision."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(data.k)] + ["label"])
        for row, lab in zip(data.x, data.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def pca_fit(data: Dataset, m: int) -> PCAModel:
    """Top-``m`` eigenvectors of the covariance of standardized features."""
    x = data.x
    n, k = x.shape
    if n < 2:
        raise DataError("PCA needs at least two rows")
    if not 1 <= m <= k:
        raise DataError(f"number of components {m} must lie in [1, k={k}]")
    mean = x.mean(axis=0)
    scale = x.std(axis=0, ddof=1)
    flat = scale == 0
    if np.any(flat):
        warnings.warn(f"zero-variance feature column(s) {np.flatnonzero(flat).tolist()}", stacklevel=2)
        scale = np.where(flat, 1.0, scale)
    z = (x - mean) / scale
    cov = z.T @ z / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:m]
    comps = evecs[:, order].T
    # sign convention: largest-magnitude entry of each axis is positive
    pivots = np.argmax(np.abs(comps), axis=1)
    comps *= np.sign(comps[np.arange(m), pivots])[:, None]
    return PCAModel(mean, scale, comps, np.clip(evals[order], 0.0, None))


def pca_transform(model: PCAModel, data: Dataset) -> Dataset:
    z = (data.x - model.mean) / model.scale
    return Dataset(z @ model.components.T, data.labels, data.classes, data.label_names)


def standardize(train: Dataset, *others: Dataset, stats=None):
    """Z-score features with the mean and sample deviation of ``train``.

    Returns ``(stats, train, *others)`` where ``stats = (mean, scale)``;
    pass ``stats`` to reuse stored statistics instead of fitting them.
    Constant columns keep unit scale.
    """
    if stats is None:
        mean = train.x.mean(axis=0)
        scale = train.x.std(axis=0, ddof=1) if len(train) > 1 else np.ones(train.k)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        mean, scale = (np.asarray(v, dtype=float) for v in stats)
    out = [Dataset((d.x - mean) / scale, d.labels, d.classes, d.label_names) for d in (train, *others)]
    return ((mean, scale), *out)


def stratified_split(data: Dataset, train_fraction: float, seed: int = 0):
    """Per-class shuffled split; class ``c`` sends ``round(f * n_c)`` rows to train."""
    if not 0 < train_fraction < 1:
        raise DataError("train_fraction must lie in (0, 1)")
    rng = _rng(seed)
    train_idx, test_idx = [], []
    for c in range(data.classes):
        idx = np.flatnonzero(data.labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_train = int(round(train_fraction * idx.size))
        if n_train == 0 and idx.size:
            warnings.warn(f"class {c} has no training rows", stacklevel=2)
        train_idx.append(idx[:n_train])
        test_idx.append(idx[n_train:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return data.subset(train_idx), data.subset(test_idx)

"""Datasets: CSV ingestion, synthetic blobs, train/test splits and group assignments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _random
from .errors import AssignmentError, DataError, EmptyFileError, MissingFileError, ParseError, SplitError


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    label_map: tuple | None = None  # original label of each class index

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise DataError(f"features must be an N x d matrix with N, d >= 1; got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels must have one entry per row")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise DataError(f"labels must lie in [0, {self.n_classes - 1}]")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows], self.n_classes, self.label_map)


@dataclass
class TrainTestSplit:
    train: Dataset
    test: Dataset
    train_indices: np.ndarray | None = None
    test_indices: np.ndarray | None = None

    def __post_init__(self):
        if self.train.d != self.test.d or self.train.n_classes != self.test.n_classes:
            raise SplitError("train and test must share feature dimension and class count")

    @property
    def n_classes(self) -> int:
        return self.train.n_classes


def load_csv(path, label_column: int | str = -1, header: bool = False) -> Dataset:
    """Read a comma-delimited numeric file with one integer label column.

    Labels are remapped to ``0..C-1`` in ascending order of the original values;
    ``Dataset.label_map`` records the original label of each class.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    names = None
    if header and rows:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise EmptyFileError(f"{path} contains no data rows")
    width = len(rows[0])
    if isinstance(label_column, str):
        if names is None or label_column not in names:
            raise ParseError(f"label column {label_column!r} not found in header")
        label_idx = names.index(label_column)
    else:
        label_idx = label_column % width if -width <= label_column < width else None
        if label_idx is None:
            raise ParseError(f"label column {label_column} out of range for {width} columns")
    first_row = 2 if header else 1
    values = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"row {r + first_row} has {len(row)} cells, expected {width}",
                             row=r + first_row)
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise ParseError(f"non-numeric cell {cell.strip()!r} at row {r + first_row}, "
                                 f"column {c + 1}", row=r + first_row, column=c + 1)
            values[r, c] = v
    raw_labels = values[:, label_idx]
    bad = np.flatnonzero(raw_labels != np.round(raw_labels))
    if bad.size:
        r = int(bad[0])
        raise ParseError(f"label at row {r + first_row}, column {label_idx + 1} is not an integer",
                         row=r + first_row, column=label_idx + 1)
    originals, labels = np.unique(raw_labels.astype(np.int64), return_inverse=True)
    features = np.delete(values, label_idx, axis=1)
    return Dataset(features, labels, len(originals), tuple(int(x) for x in originals))


def _blob_centers(C: int, d: int, separation: float) -> np.ndarray:
    """Class centers with adjacent centers exactly ``separation`` apart."""
    centers = np.zeros((C, d))
    if C == 1:
        return centers
    if d == 1:
        centers[:, 0] = separation * np.arange(C)
        return centers
    radius = separation / (2 * math.sin(math.pi / C))
    angles = 2 * math.pi * np.arange(C) / C
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return centers


def generate_blobs(n_per_class: int, C: int = 2, d: int = 2, separation: float = 3.0,
                   noise: float = 1.0, seed: int = 0) -> Dataset:
    """Isotropic Gaussian clusters, one per class, rows ordered by class."""
    if n_per_class < 1 or C < 1 or d < 1:
        raise DataError("n_per_class, C and d must all be >= 1")
    if separation <= 0:
        raise DataError("separation must be positive")
    rng = np.random.default_rng(_random.derive_seed(seed, _random.TAG_MISC, 1))
    centers = _blob_centers(C, d, separation)
    X = np.repeat(centers, n_per_class, axis=0) + noise * rng.standard_normal((C * n_per_class, d))
    y = np.repeat(np.arange(C), n_per_class)
    return Dataset(X, y, C)


def _partition(dataset: Dataset, n_train: int, seed: int) -> TrainTestSplit:
    rng = np.random.default_rng(_random.derive_seed(seed, _random.TAG_MISC, 2))
    perm = rng.permutation(len(dataset))
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    return TrainTestSplit(dataset.subset(tr), dataset.subset(te), tr, te)


def split(dataset: Dataset, train_fraction: float, seed: int = 0) -> TrainTestSplit:
    """Seeded shuffle then partition; train size is ``floor(N * fraction)`` clamped to ``[1, N-1]``."""
    N = len(dataset)
    if not 0 < train_fraction < 1:
        raise SplitError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if N < 2:
        raise SplitError("need at least two rows to split")
    n_train = min(max(int(math.floor(N * train_fraction)), 1), N - 1)
    return _partition(dataset, n_train, seed)


def split_counts(dataset: Dataset, n_train: int, n_test: int | None = None, seed: int = 0) -> TrainTestSplit:
    """Like :func:`split` but with explicit sizes; rows beyond ``n_train + n_test`` are dropped."""
    N = len(dataset)
    n_test = N - n_train if n_test is None else n_test
    if n_train < 1 or n_test < 1 or n_train + n_test > N:
        raise SplitError(f"cannot take {n_train} train and {n_test} test rows from {N}")
    s = _partition(dataset.subset(np.arange(N)), n_train, seed)
    if n_test < len(s.test):
        keep = np.arange(n_test)
        s = TrainTestSplit(s.train, s.test.subset(keep), s.train_indices, s.test_indices[keep])
    return s


def blobs_split(n_train: int, n_test: int | None = None, C: int = 2, d: int = 2,
                separation: float = 3.0, noise: float = 1.0, seed: int = 0) -> TrainTestSplit:
    n_test = n_train if n_test is None else n_test
    per_class = -(-(n_train + n_test) // C)
    data = generate_blobs(per_class, C, d, separation, noise, seed)
    return split_counts(data, n_train, n_test, seed)


@dataclass
class GroupAssignment:
    group_of: np.ndarray
    G: int = field(init=False)

    def __post_init__(self):
        self.group_of = np.asarray(self.group_of, dtype=np.int64)
        if self.group_of.ndim != 1 or self.group_of.size == 0:
            raise AssignmentError("group assignment needs at least one point")
        if self.group_of.min() < 0:
            raise AssignmentError("group indices must be non-negative")
        self.G = int(self.group_of.max()) + 1
        sizes = np.bincount(self.group_of, minlength=self.G)
        if np.any(sizes == 0):
            raise AssignmentError(f"empty groups: {np.flatnonzero(sizes == 0).tolist()}")

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == g)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.G)


def assign_groups(n: int, G: int, seed: int = 0) -> GroupAssignment:
    """Random near-equal groups."""
    if not 1 <= G <= n:
        raise AssignmentError(f"cannot form {G} non-empty groups from {n} points")
    rng = np.random.default_rng(_random.derive_seed(seed, _random.TAG_MISC, 3))
    return GroupAssignment(np.arange(n)[rng.permutation(n)] % G)


def blobs_with_junk(n_groups: int = 10, group_size: int = 10, n_test: int = 100, C: int = 2,
                    d: int = 2, separation: float = 3.0, noise: float = 1.0, junk_group: int = 0,
                    seed: int = 0) -> tuple[TrainTestSplit, GroupAssignment, float]:
    """Blob split whose training rows form equal groups, one with shuffled labels.

    Returns ``(split, groups, mislabeled_fraction)`` where the last item is the
    share of junk-group labels that the shuffle actually changed.
    """
    if not 0 <= junk_group < n_groups:
        raise AssignmentError("junk_group out of range")
    s = blobs_split(n_groups * group_size, n_test, C, d, separation, noise, seed)
    groups = assign_groups(len(s.train), n_groups, seed)
    junk = groups.members(junk_group)
    rng = np.random.default_rng(_random.derive_seed(seed, _random.TAG_MISC, 4))
    labels = s.train.labels.copy()
    labels[junk] = rng.permutation(labels[junk])
    changed = float(np.mean(labels[junk] != s.train.labels[junk]))
    train = Dataset(s.train.features, labels, s.train.n_classes, s.train.label_map)
    return TrainTestSplit(train, s.test, s.train_indices, s.test_indices), groups, changed

"""Small deterministic classifiers exposed as test-accuracy cooperative games."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, TrainTestSplit
from .errors import ConfigError, PreconditionError, SplitError
from .game import CooperativeGame

LEARNER_KINDS = ("knn", "naive-bayes", "logreg")
_KNN_BATCH = 512


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "knn"
    k: int = 5
    var_smoothing: float = 1e-9
    iterations: int = 200
    step: float = 0.1

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ConfigError(f"unknown learner {self.kind!r}; expected one of {LEARNER_KINDS}")
        if self.k < 1:
            raise ConfigError("knn needs k >= 1")
        if self.var_smoothing <= 0:
            raise ConfigError("naive Bayes needs var_smoothing > 0")
        if self.iterations < 1 or self.step <= 0:
            raise ConfigError("logreg needs iterations >= 1 and step > 0")

    def to_dict(self) -> dict:
        return asdict(self)


def pairwise_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # explicit differences, not the |a|^2 + |b|^2 - 2ab expansion: ties stay exact
    return np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2))


def _argmax_low(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(scores, axis=1)


def _knn_predict(k, X, y, n_classes, X_test):
    dist = pairwise_distances(X_test, X)
    order = np.argsort(dist, axis=1, kind="stable")[:, : min(k, len(y))]
    votes = np.zeros((X_test.shape[0], n_classes), dtype=np.int64)
    np.add.at(votes, (np.arange(X_test.shape[0])[:, None], y[order]), 1)
    return _argmax_low(votes)


def _nb_predict(spec, X, y, n_classes, X_test, global_var):
    eps = spec.var_smoothing * (global_var + 1.0)
    classes = np.unique(y)
    scores = np.full((X_test.shape[0], n_classes), -np.inf)
    for c in classes:
        Xc = X[y == c]
        mu = Xc.mean(axis=0)
        var = Xc.var(axis=0) + eps
        ll = -0.5 * (np.log(2 * np.pi * var) + (X_test - mu) ** 2 / var).sum(axis=1)
        scores[:, c] = np.log(len(Xc) / len(y)) + ll
    return _argmax_low(scores)


def _logreg_predict(spec, X, y, n_classes, X_test, global_mean, global_std):
    classes = np.unique(y)
    if classes.size == 1:
        return np.full(X_test.shape[0], classes[0])
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    # zero-variance columns fall back to statistics of the full training set
    flat = sd == 0
    mu = np.where(flat, global_mean, mu)
    sd = np.where(flat, global_std, sd)
    sd = np.where(sd == 0, 1.0, sd)
    Z = (X - mu) / sd
    targets = (y[:, None] == classes[None, :]).astype(np.float64)
    W = np.zeros((Z.shape[1], classes.size))
    b = np.zeros(classes.size)
    for _ in range(spec.iterations):
        p = 1.0 / (1.0 + np.exp(-(Z @ W + b)))
        err = p - targets
        W -= spec.step * (Z.T @ err) / len(y)
        b -= spec.step * err.mean(axis=0)
    scores = ((X_test - mu) / sd) @ W + b
    return classes[_argmax_low(scores)]


def train_predict(spec: LearnerSpec, train_subset: Dataset, test_features: np.ndarray,
                  reference: Dataset | None = None) -> np.ndarray:
    """Fit ``spec`` on ``train_subset`` and label ``test_features``.

    ``reference`` supplies the global feature statistics used for smoothing and
    standardization fallbacks; it defaults to ``train_subset`` itself.
    """
    if len(train_subset) == 0:
        raise PreconditionError("cannot train on an empty subset")
    X, y, C = train_subset.features, train_subset.labels, train_subset.n_classes
    test_features = np.asarray(test_features, dtype=np.float64)
    ref = (reference or train_subset).features
    if spec.kind == "knn":
        return _knn_predict(spec.k, X, y, C, test_features)
    if spec.kind == "naive-bayes":
        return _nb_predict(spec, X, y, C, test_features, ref.var(axis=0))
    return _logreg_predict(spec, X, y, C, test_features, ref.mean(axis=0), ref.std(axis=0))


class AccuracyGame(CooperativeGame):
    """Players are training rows; ``U(S)`` is test accuracy of the learner fit on ``S``.

    ``U(empty) = 1/C``, the expected accuracy of guessing uniformly at random.
    """

    def __init__(self, split: TrainTestSplit, spec: LearnerSpec):
        if len(split.test) == 0:
            raise SplitError("accuracy utility needs a non-empty test set")
        self.split = split
        self.spec = spec
        super().__init__(len(split.train), utility_range=(0.0, 1.0), name=f"accuracy[{spec.kind}]")
        self.baseline = 1.0 / split.n_classes
        if spec.kind == "knn":
            train, test = split.train, split.test
            dist = pairwise_distances(test.features, train.features)
            self._order = np.argsort(dist, axis=1, kind="stable")
            self._ordered_labels = train.labels[self._order]
            self._onehot = self._ordered_labels[..., None] == np.arange(split.n_classes)

    def _values(self, masks):
        if self.spec.kind == "knn":
            return np.concatenate([self._knn_values(masks[s:s + _KNN_BATCH])
                                   for s in range(0, len(masks), _KNN_BATCH)])
        out = np.empty(len(masks))
        for r, row in enumerate(masks):
            out[r] = self.accuracy(np.flatnonzero(row))
        return out

    def _knn_values(self, masks):
        # neighbours of each test point in distance order, restricted to the coalition
        present = masks[:, self._order]                      # (B, T, n)
        size = masks.sum(axis=1)
        k = np.minimum(self.spec.k, size)[:, None, None]
        take = present & (np.cumsum(present, axis=2, dtype=np.int32) <= k)
        votes = np.stack([(take & self._onehot[None, :, :, c]).sum(axis=2)
                          for c in range(self.split.n_classes)], axis=2)
        pred = np.argmax(votes, axis=2)
        acc = (pred == self.split.test.labels[None, :]).mean(axis=1)
        return np.where(size == 0, self.baseline, acc)

    def accuracy(self, rows) -> float:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            return self.baseline
        pred = train_predict(self.spec, self.split.train.subset(rows), self.split.test.features,
                             reference=self.split.train)
        return float(np.mean(pred == self.split.test.labels))


def accuracy_utility(split: TrainTestSplit, spec: LearnerSpec) -> AccuracyGame:
    return AccuracyGame(split, spec)

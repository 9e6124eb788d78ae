"""Monocular disparity regressors trained online from stereo labels."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np


class LearningFrozen(RuntimeError):
    pass


class Untrained(RuntimeError):
    pass


class TrainingSet:
    """Append-only store of (feature vector, disparity, timestamp) samples.

    Features are kept in a preallocated array that doubles when full, so
    appending stays cheap over thousands of frames.
    """

    def __init__(self, dim, capacity=1024):
        self.dim = dim
        self._x = np.empty((capacity, dim))
        self._y = np.empty(capacity)
        self._t = np.empty(capacity)
        self._n = 0
        self.frozen = False

    def __len__(self):
        return self._n

    @property
    def features(self):
        return self._x[:self._n]

    @property
    def disparities(self):
        return self._y[:self._n]

    @property
    def timestamps(self):
        return self._t[:self._n]

    def append(self, features, disparity, timestamp=0.0):
        if self.frozen:
            raise LearningFrozen("learning-frozen: training set no longer accepts samples")
        features = np.asarray(features, dtype=float)
        if features.shape != (self.dim,):
            raise ValueError(f"expected a feature vector of length {self.dim}")
        if disparity < 0:
            raise ValueError("disparity must be non-negative")
        if self._n == len(self._x):
            grow = len(self._x)
            self._x = np.concatenate([self._x, np.empty((grow, self.dim))])
            self._y = np.concatenate([self._y, np.empty(grow)])
            self._t = np.concatenate([self._t, np.empty(grow)])
        self._x[self._n] = features
        self._y[self._n] = disparity
        self._t[self._n] = timestamp
        self._n += 1

    def freeze(self):
        self.frozen = True

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"f{i}" for i in range(self.dim)] + ["disparity", "timestamp"])
            for x, y, t in zip(self.features, self.disparities, self.timestamps):
                w.writerow([repr(float(v)) for v in x] + [repr(float(y)), repr(float(t))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header[-2:] != ["disparity", "timestamp"]:
            raise ValueError(f"{path}: missing disparity/timestamp columns")
        ts = cls(len(header) - 2, capacity=max(len(body), 1))
        for row in body:
            vals = [float(v) for v in row]
            ts.append(vals[:-2], vals[-2], vals[-1])
        return ts


def knn_indices(X, query, k):
    """Indices of the `k` rows of `X` closest to `query`, lowest index first on ties."""
    diff = X - query
    d2 = np.einsum("ij,ij->i", diff, diff)
    n = len(d2)
    if n <= k:
        return np.arange(n)
    kth = np.partition(d2, k - 1)[k - 1]
    inside = np.flatnonzero(d2 < kth)
    ties = np.flatnonzero(d2 == kth)[:k - len(inside)]
    return np.sort(np.concatenate([inside, ties]))


def knn_predict(X, y, queries, k):
    """Unweighted kNN mean of `y` for each row of `queries` (same rule as MonoEstimator)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise Untrained("untrained: no training samples")
    return np.array([y[knn_indices(X, q, k)].mean() for q in np.asarray(queries, dtype=float)])


class MonoEstimator:
    """kNN regressor over a growing training set, with prediction smoothing."""

    def __init__(self, dim, k=5, smooth_window=4):
        if k < 1:
            raise ValueError("k must be >= 1")
        if smooth_window < 1:
            raise ValueError("smooth_window must be >= 1")
        self.k = k
        self.smooth_window = smooth_window
        self.training_set = TrainingSet(dim)
        self._recent = deque(maxlen=smooth_window)

    def __len__(self):
        return len(self.training_set)

    @property
    def frozen(self):
        return self.training_set.frozen

    def add_sample(self, features, disparity, timestamp=0.0):
        self.training_set.append(features, disparity, timestamp)
        return self

    def freeze(self):
        self.training_set.freeze()

    def predict(self, features):
        ts = self.training_set
        if len(ts) == 0:
            raise Untrained("untrained: no training samples")
        idx = knn_indices(ts.features, np.asarray(features, dtype=float), self.k)
        return float(ts.disparities[idx].mean())

    def smooth(self, raw):
        self._recent.append(float(raw))
        return sum(self._recent) / len(self._recent)

    def reset_smoothing(self):
        self._recent.clear()


@dataclass(frozen=True)
class LinearModel:
    slopes: np.ndarray
    intercept: float
    degenerate: bool = False

    @property
    def weights(self):
        return np.append(self.slopes, self.intercept)

    def predict(self, features):
        return np.asarray(features, dtype=float) @ self.slopes + self.intercept


def linear_fit(X, y):
    """Least-squares affine fit; minimum-norm solution when the design is rank deficient."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("X must be (n, dim) with n == len(y) > 0")
    A = np.hstack([X, np.ones((len(X), 1))])
    w, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    return LinearModel(w[:-1], float(w[-1]), degenerate=bool(rank < A.shape[1]))


def linear_predict(model, features):
    return model.predict(features)

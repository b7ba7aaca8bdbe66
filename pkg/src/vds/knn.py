"""Exact k-nearest-neighbor decisions under cosine distance.

No index structures or approximations: every query is scored against every
training row. Ties are resolved deterministically so repeated runs agree
byte-for-byte:

  * equal distances keep the lower training index first (stable sort),
  * equal vote counts go to the class with the smaller mean distance among
    the tied classes' neighbors, then to the lower class id.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, UsageError, ZeroVector


@dataclass
class KnnConfig:
    k: int = 1

    def check(self, n_train):
        if self.k < 1:
            raise UsageError(f"k must be positive, got {self.k}")
        if self.k > n_train:
            raise UsageError(f"k={self.k} exceeds the {n_train} training rows")


def _unit_rows(X, what):
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroVector(f"zero-norm row in {what}")
    return X / norms


def cosine_distances(queries, anchors):
    """1 - cosine similarity, clamped into [0, 2]."""
    q = _unit_rows(queries, "queries")
    a = _unit_rows(anchors, "anchors")
    return np.clip(1.0 - q @ a.T, 0.0, 2.0)


def _vote(dist_row, order, labels, k):
    nearest = order[:k]
    votes = np.bincount(labels[nearest])
    best = votes.max()
    tied = np.flatnonzero(votes == best)
    if len(tied) == 1:
        return int(tied[0])
    means = [dist_row[nearest[labels[nearest] == c]].mean() for c in tied]
    means = np.asarray(means)
    # lowest mean distance wins; argmin already prefers the lower class id
    return int(tied[np.argmin(means)])


def knn_predict(train_reps, train_labels, test_reps, k=1):
    """Predicted labels for every query row."""
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if len(train_labels) != len(train_reps):
        raise ShapeMismatch("training labels and rows disagree in length")
    KnnConfig(k=k).check(len(train_labels))
    D = cosine_distances(test_reps, train_reps)
    out = np.empty(D.shape[0], dtype=np.int64)
    for i in range(D.shape[0]):
        order = np.argsort(D[i], kind="stable")
        out[i] = _vote(D[i], order, train_labels, k)
    return out


def knn_eval(bundle, k=1, train_reps=None, test_reps=None):
    """(accuracy, macro F1) on the bundle's test split. Transformed
    representations may be passed in place of the stored ones."""
    from .metrics import accuracy, macro_f1
    Xtr = bundle.train_reps if train_reps is None else train_reps
    Xte = bundle.test_reps if test_reps is None else test_reps
    pred = knn_predict(Xtr, bundle.train_labels, Xte, k=k)
    return (accuracy(pred, bundle.test_labels),
            macro_f1(pred, bundle.test_labels, bundle.n_classes))


def sibling_rate(reps, labels, k=1):
    """Mean fraction of each row's k nearest neighbors (itself excluded)
    that carry the row's own label. 1.0 means perfectly pure neighborhoods."""
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if k < 1:
        raise UsageError(f"k must be positive, got {k}")
    if k > n - 1:
        raise UsageError(f"k={k} exceeds the {n - 1} other rows")
    D = cosine_distances(reps, reps)
    np.fill_diagonal(D, np.inf)
    total = 0.0
    for i in range(n):
        order = np.argsort(D[i], kind="stable")[:k]
        total += float((labels[order] == labels[i]).mean())
    return total / n

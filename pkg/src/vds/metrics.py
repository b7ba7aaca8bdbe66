"""Classification and clustering quality metrics.

All three are exact, brute-force-verifiable implementations: accuracy is a
match fraction, macro-F1 averages per-class F1 uniformly (zero-support classes
contribute 0, penalizing collapsed predictors), and the Adjusted Rand Index is
the chance-corrected pair-counting index computed from the contingency table.
"""

from math import comb

import numpy as np

from .errors import ShapeMismatch


def _as_labels(x, name):
    arr = np.asarray(x, dtype=np.int64)
    if arr.ndim != 1:
        raise ShapeMismatch(f"{name} must be a 1-d label vector")
    return arr


def accuracy(pred, truth):
    """Fraction of exact matches."""
    p = _as_labels(pred, "pred")
    t = _as_labels(truth, "truth")
    if p.shape != t.shape:
        raise ShapeMismatch(f"length mismatch: {p.shape[0]} vs {t.shape[0]}")
    return float((p == t).mean())


def macro_f1(pred, truth, n_classes):
    """Unweighted mean over classes of per-class F1 = 2PR / (P + R).

    A class with no predicted and no true positives has F1 = 0 and still
    enters the average.
    """
    p = _as_labels(pred, "pred")
    t = _as_labels(truth, "truth")
    if p.shape != t.shape:
        raise ShapeMismatch(f"length mismatch: {p.shape[0]} vs {t.shape[0]}")
    total = 0.0
    for c in range(n_classes):
        tp = int(np.sum((p == c) & (t == c)))
        fp = int(np.sum((p == c) & (t != c)))
        fn = int(np.sum((p != c) & (t == c)))
        denom = 2 * tp + fp + fn
        total += (2 * tp / denom) if denom else 0.0
    return total / n_classes


def ari(a, b):
    """Adjusted Rand Index between two label assignments.

    Computed from the contingency table n_ij:

        ARI = (sum C(n_ij,2) - E) / (max_index - E)
        E   = sum C(a_i,2) * sum C(b_j,2) / C(n,2)
        max_index = (sum C(a_i,2) + sum C(b_j,2)) / 2

    When the denominator vanishes (both clusterings degenerate) the value is
    1 if they induce the same partition and 0 otherwise.
    """
    x = _as_labels(a, "a")
    y = _as_labels(b, "b")
    if x.shape != y.shape:
        raise ShapeMismatch(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    n = x.shape[0]
    if n < 2:
        raise ShapeMismatch("ARI needs at least 2 samples")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1), dtype=np.int64)
    np.add.at(table, (xi, yi), 1)

    sum_ij = sum(comb(int(nij), 2) for nij in table.ravel())
    sum_a = sum(comb(int(ni), 2) for ni in table.sum(axis=1))
    sum_b = sum(comb(int(nj), 2) for nj in table.sum(axis=0))
    expected = sum_a * sum_b / comb(n, 2)
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        # same partition iff the contingency table is a one-nonzero-per-line
        # matrix; label ids themselves must not matter
        same = (np.count_nonzero(table, axis=1) == 1).all() and \
               (np.count_nonzero(table, axis=0) == 1).all()
        return 1.0 if same else 0.0
    return (sum_ij - expected) / (max_index - expected)

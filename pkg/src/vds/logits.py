"""Logit computation on latent representations.

Two families: similarity logits score a representation by cosine against each
semantic basis (entries live in [-1, 1] and survive any positive rescaling of
the input), matmul logits are the ordinary head product r @ W. Each family has
an exp-normalized variant, and sim-gt is the training-only variant that scores
against the ground-truth class basis alone.
"""

import enum

import numpy as np

from .basis import class_bases_matrix
from .errors import InvalidMode, ShapeMismatch, ZeroVector


class LogitsMode(str, enum.Enum):
    SIM_ALL = "sim-all"
    MAT_MUL = "mat-mul"
    SIM_GT = "sim-gt"
    SIM_ALL_EXP = "sim-all-exp"
    MAT_MUL_EXP = "mat-mul-exp"

    @property
    def is_sim(self):
        return self in (LogitsMode.SIM_ALL, LogitsMode.SIM_GT, LogitsMode.SIM_ALL_EXP)

    @property
    def is_exp(self):
        return self in (LogitsMode.SIM_ALL_EXP, LogitsMode.MAT_MUL_EXP)

    @property
    def base_mode(self):
        """The mode whose raw logits this mode transforms."""
        if self is LogitsMode.SIM_ALL_EXP:
            return LogitsMode.SIM_ALL
        if self is LogitsMode.MAT_MUL_EXP:
            return LogitsMode.MAT_MUL
        return self


PREDICTABLE_MODES = (LogitsMode.SIM_ALL, LogitsMode.MAT_MUL,
                     LogitsMode.SIM_ALL_EXP, LogitsMode.MAT_MUL_EXP)


def cosine(a, b):
    """Cosine similarity of two vectors, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine against a zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def sim_logits(r, bases):
    """logits[i] = cosine(basis row i, r) for every vocabulary token."""
    B = np.asarray(bases.bases, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    rn = np.linalg.norm(r)
    if rn == 0.0:
        raise ZeroVector("representation has zero norm")
    row_norms = np.linalg.norm(B, axis=1)
    if np.any(row_norms == 0.0):
        raise ZeroVector("a basis row has zero norm")
    return np.clip((B @ r) / (row_norms * rn), -1.0, 1.0)


def mm_logits(r, W):
    """Plain head product r @ W."""
    r = np.asarray(r, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if r.shape[-1] != W.shape[0]:
        raise ShapeMismatch(f"r has dim {r.shape[-1]}, head expects {W.shape[0]}")
    return r @ W


def exp_transform(z):
    """exp(z - max z) normalized to sum 1; preserves argmax and ordering."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax(z):
    return exp_transform(z)


class ProbDist:
    """Probabilities over a stated support with the temperature recorded."""

    __slots__ = ("probs", "temperature_used", "support_size")

    def __init__(self, probs, temperature_used):
        self.probs = probs
        self.temperature_used = float(temperature_used)
        self.support_size = int(probs.shape[-1])


def to_probs(logits, tau=1.0):
    """softmax(tau * logits), max-shifted for overflow safety."""
    if tau <= 0:
        raise InvalidMode(f"temperature must be positive, got {tau}")
    return ProbDist(exp_transform(tau * np.asarray(logits, dtype=np.float64)), tau)


def class_scores(reps, bundle, bases, mode):
    """One score per class for each representation row.

    Sim modes score cosine(class basis, r) where the class basis is the mean
    of the class's token bases; matmul modes average the class's token columns
    of r @ W. Exp variants pass the class-score vector through exp_transform,
    which never changes the argmax.
    """
    mode = LogitsMode(mode)
    if mode not in PREDICTABLE_MODES:
        raise InvalidMode(f"{mode.value} has no prediction rule")
    R = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    if mode.base_mode is LogitsMode.SIM_ALL:
        cb = class_bases_matrix(bases, bundle.verbalizer, bundle.n_classes)
        cb_norms = np.linalg.norm(cb, axis=1)
        r_norms = np.linalg.norm(R, axis=1)
        if np.any(cb_norms == 0.0) or np.any(r_norms == 0.0):
            raise ZeroVector("zero-norm vector in cosine prediction")
        scores = np.clip((R @ cb.T) / np.outer(r_norms, cb_norms), -1.0, 1.0)
    else:
        token_logits = R @ np.asarray(bundle.lm_head, dtype=np.float64)
        scores = np.stack(
            [token_logits[:, bundle.verbalizer[c]].mean(axis=1)
             for c in range(bundle.n_classes)], axis=1)
    if mode.is_exp:
        scores = exp_transform(scores)
    return scores


def predict_class(r, bundle, bases, mode):
    """Argmax class for one representation; ties go to the lowest class id."""
    return int(np.argmax(class_scores(r, bundle, bases, mode)[0]))


def predict_all(reps, bundle, bases, mode):
    """Vectorized predict_class over representation rows."""
    return np.argmax(class_scores(reps, bundle, bases, mode), axis=1)


def estimate_flops(mode, d, v):
    """Floating-point operations to produce one logits vector.

    Cosine costs 6d per basis (2d multiply-accumulate for the dot, 2d for each
    of the two norms); the head product costs 2dv; scoring only the ground
    truth basis costs 6d total. Exp and normalization overhead is excluded.
    """
    if d < 1 or v < 1:
        raise ShapeMismatch(f"dimensions must be positive, got d={d}, v={v}")
    mode = LogitsMode(mode)
    if mode.base_mode is LogitsMode.SIM_ALL:
        return 6 * d * v
    if mode.base_mode is LogitsMode.MAT_MUL:
        return 2 * d * v
    return 6 * d

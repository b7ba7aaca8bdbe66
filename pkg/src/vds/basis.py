"""Semantic bases from an LM-head matrix.

The head W maps latent vectors (dimension d) to vocabulary logits (size v).
Row i of the Moore-Penrose pseudoinverse W+ is the latent vector whose image
under W is the least-squares fit of the onehot logits of token i; we call it
the semantic basis of token i. Embedding matrices already store one row per
token, so their bases are the rows verbatim.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, NumericalError, ShapeMismatch

HEAD_PINV = "head_pinv"
EMBEDDING = "embedding"

DEFAULT_RCOND = 1e-10


def pseudoinverse(W, rcond=DEFAULT_RCOND):
    """Moore-Penrose pseudoinverse via SVD, in 64-bit.

    Singular values sigma <= rcond * sigma_max are treated as zero, which
    handles rank-deficient input. Returns a v x d array for a d x v input.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.size == 0:
        raise ShapeMismatch(f"expected a nonempty 2-d matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise NonFinite("matrix contains non-finite entries")
    try:
        U, s, Vt = np.linalg.svd(W, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD did not converge: {e}") from e
    cutoff = rcond * s.max() if s.size else 0.0
    s_inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return (Vt.T * s_inv) @ U.T


def check_penrose(W, Wp, tol=1e-8):
    """Check the four Penrose conditions; residuals are max-abs-entry norms.

    Returns (residuals, passed) where residuals is a tuple
    (|W Wp W - W|, |Wp W Wp - Wp|, |(W Wp)^T - W Wp|, |(Wp W)^T - Wp W|).
    """
    W = np.asarray(W, dtype=np.float64)
    Wp = np.asarray(Wp, dtype=np.float64)
    if W.shape != Wp.T.shape:
        raise ShapeMismatch(f"incompatible shapes {W.shape} and {Wp.shape}")
    WWp = W @ Wp
    WpW = Wp @ W
    r1 = float(np.abs(WWp @ W - W).max())
    r2 = float(np.abs(WpW @ Wp - Wp).max())
    r3 = float(np.abs(WWp.T - WWp).max())
    r4 = float(np.abs(WpW.T - WpW).max())
    residuals = (r1, r2, r3, r4)
    return residuals, all(r < tol for r in residuals)


# v*v grams above this many bytes are not materialized by the lowmem check
GRAM_BYTE_LIMIT = 1 << 30


def check_penrose_lowmem(W, Wp, tol=1e-8, gram_limit=GRAM_BYTE_LIMIT):
    """check_penrose for heads whose vocabulary is too large for the v x v
    gram (Wp W): a 50k vocabulary would need ~19 GiB under the plain check.

    Small inputs take the exact path above (identical residuals). Otherwise
    conditions 1-3 are computed with associativity-friendly ordering so no
    intermediate exceeds d x v, and condition 4, which has no such
    rearrangement, is reported as None and excluded from the verdict.
    """
    W = np.asarray(W, dtype=np.float64)
    Wp = np.asarray(Wp, dtype=np.float64)
    if W.shape != Wp.T.shape:
        raise ShapeMismatch(f"incompatible shapes {W.shape} and {Wp.shape}")
    v = W.shape[1]
    if v * v * 8 <= gram_limit:
        return check_penrose(W, Wp, tol)
    WWp = W @ Wp
    r1 = float(np.abs(WWp @ W - W).max())
    r2 = float(np.abs(Wp @ WWp - Wp).max())
    r3 = float(np.abs(WWp.T - WWp).max())
    residuals = (r1, r2, r3, None)
    return residuals, all(r < tol for r in residuals[:3])


@dataclass
class SemanticBases:
    """One basis per vocabulary token: a v x d matrix plus provenance."""

    bases: np.ndarray
    source: str
    rcond: float

    @property
    def v(self):
        return self.bases.shape[0]

    @property
    def d(self):
        return self.bases.shape[1]


def head_bases(W, rcond=DEFAULT_RCOND):
    """One basis per vocabulary token: the rows of the d x v head's
    pseudoinverse, so bases @ W approximates the identity on token space."""
    return SemanticBases(bases=pseudoinverse(W, rcond),
                         source=HEAD_PINV, rcond=rcond)


def embedding_bases(E):
    """Bases from an embedding matrix: the rows themselves, copied."""
    E = np.array(E, dtype=np.float64, copy=True)
    if E.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d matrix, got shape {E.shape}")
    return SemanticBases(bases=E, source=EMBEDDING, rcond=0.0)


def class_basis(bases, verbalizer, class_id):
    """Mean of the semantic bases of the class's verbalizer tokens."""
    if class_id not in verbalizer:
        raise KeyError(f"unknown class id {class_id}")
    tokens = verbalizer[class_id]
    return bases.bases[np.asarray(tokens, dtype=np.int64)].mean(axis=0)


def class_bases_matrix(bases, verbalizer, n_classes):
    """Stack class_basis for ids 0..n_classes-1 into an n_classes x d matrix."""
    return np.stack([class_basis(bases, verbalizer, c) for c in range(n_classes)])


def save_bases(sb, path):
    """Write the bases as raw little-endian f32 plus a one-line JSON sidecar."""
    arr = np.ascontiguousarray(sb.bases, dtype="<f4")
    with open(path, "wb") as f:
        f.write(arr.tobytes())
    sidecar = {"v": int(sb.v), "d": int(sb.d), "source": sb.source, "rcond": sb.rcond}
    with open(str(path) + ".json", "w", encoding="utf-8") as f:
        f.write(json.dumps(sidecar, sort_keys=True, separators=(",", ":")) + "\n")


def load_bases(path):
    """Read back a raw f32 bases file written by save_bases."""
    with open(str(path) + ".json", "r", encoding="utf-8") as f:
        sidecar = json.loads(f.read())
    raw = np.fromfile(path, dtype="<f4")
    v, d = int(sidecar["v"]), int(sidecar["d"])
    if raw.size != v * d:
        raise ShapeMismatch(f"bases payload holds {raw.size} floats, header says {v}x{d}")
    return SemanticBases(bases=raw.reshape(v, d).astype(np.float64),
                         source=sidecar["source"], rcond=float(sidecar["rcond"]))

"""Representation bundles: the toolkit's universal input.

A bundle packages an LM-head matrix, train/test representations with labels,
and the verbalizer (class id -> vocabulary token ids). Bundles are persisted
in the VDSR format below, which is byte-deterministic so golden files can be
diffed and any language can parse it:

    magic "VDSR" (4 bytes)
    version      u32 LE = 1
    header_len   u64 LE
    JSON header  {"d","v","n_classes","class_names","verbalizer",
                  "n_train","n_test","dtype":"f32","layout":"row-major"}
    lm_head      d*v f32 LE, row-major
    train_reps   n_train*d f32 LE
    train_labels n_train u32 LE
    test_reps    n_test*d f32 LE
    test_labels  n_test u32 LE

No padding between blocks. Floats are stored as f32; computation precision is
each module's own choice.

The synthetic generator produces deterministic desk-scale fixtures: class
centers are true semantic bases of the head, optionally pushed through a
hidden mixing matrix so that raw cosine scoring is near chance while the
mapping back to the bases stays learnable.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import basis as _basis
from .errors import (BadMagic, BundleInvalid, NonFinite, ShapeMismatch,
                     Truncated, UnsupportedVersion)

MAGIC = b"VDSR"
VERSION = 1

# fixture geometry constants; see gen_synthetic
MIX_DECADES = 1.5
NOISE_REL_SCALE = 1.75


@dataclass
class ReprBundle:
    d: int
    v: int
    n_classes: int
    class_names: list
    verbalizer: dict          # class id -> list of token ids
    lm_head: np.ndarray       # d x v, f32
    train_reps: np.ndarray    # n_train x d, f32
    train_labels: np.ndarray  # n_train, u32
    test_reps: np.ndarray     # n_test x d, f32
    test_labels: np.ndarray   # n_test, u32

    @property
    def n_train(self):
        return self.train_reps.shape[0]

    @property
    def n_test(self):
        return self.test_reps.shape[0]


@dataclass
class SynthSpec:
    """Parameters of the synthetic fixture generator."""

    seed: int = 42
    d: int = 64
    v: int = 200
    n_classes: int = 5
    n_train: int = 1000
    n_test: int = 200
    noise_sigma: float = 0.1
    mix: bool = True

    def violations(self):
        out = []
        if self.d < 2:
            out.append("DimTooSmall")
        for name in ("d", "v", "n_classes", "n_train", "n_test"):
            if getattr(self, name) < 1:
                out.append("NonPositiveField")
                break
        if self.n_classes > self.v:
            out.append("MoreClassesThanTokens")
        if self.noise_sigma < 0:
            out.append("NegativeNoise")
        return out


def validate_bundle(bundle):
    """Return every invariant violation as a machine-readable code string.

    An empty list means the bundle is valid. Violations are data, not errors.
    """
    out = []
    b = bundle
    if len(b.class_names) != b.n_classes:
        out.append("ClassNamesLength")
    missing = [c for c in range(b.n_classes) if c not in b.verbalizer or not b.verbalizer[c]]
    if missing:
        out.append("VerbalizerIncomplete")
    if any(not (0 <= int(t) < b.v) for toks in b.verbalizer.values() for t in toks):
        out.append("TokenOutOfRange")
    shapes_ok = (b.lm_head.shape == (b.d, b.v)
                 and b.train_reps.ndim == 2 and b.train_reps.shape[1] == b.d
                 and b.test_reps.ndim == 2 and b.test_reps.shape[1] == b.d
                 and b.train_labels.shape == (b.train_reps.shape[0],)
                 and b.test_labels.shape == (b.test_reps.shape[0],))
    if not shapes_ok:
        out.append("ShapeMismatch")
    if b.train_reps.shape[0] < 1 or b.test_reps.shape[0] < 1:
        out.append("EmptySplit")
    for arr in (b.lm_head, b.train_reps, b.test_reps):
        if not np.all(np.isfinite(arr)):
            out.append("NonFinite")
            break
    if (b.train_labels.size and int(b.train_labels.max(initial=0)) >= b.n_classes) or \
       (b.test_labels.size and int(b.test_labels.max(initial=0)) >= b.n_classes):
        out.append("LabelOutOfRange")
    return out


def _header_dict(b):
    return {
        "d": int(b.d),
        "v": int(b.v),
        "n_classes": int(b.n_classes),
        "class_names": list(b.class_names),
        "verbalizer": {str(c): [int(t) for t in toks] for c, toks in sorted(b.verbalizer.items())},
        "n_train": int(b.n_train),
        "n_test": int(b.n_test),
        "dtype": "f32",
        "layout": "row-major",
    }


def write_bundle(bundle, path):
    """Serialize a valid bundle; identical bundles produce identical bytes."""
    violations = validate_bundle(bundle)
    if violations:
        raise BundleInvalid(violations)
    header = json.dumps(_header_dict(bundle), sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(bundle.lm_head, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(bundle.train_reps, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(bundle.train_labels, dtype="<u4").tobytes())
        f.write(np.ascontiguousarray(bundle.test_reps, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(bundle.test_labels, dtype="<u4").tobytes())


def read_bundle(path):
    """Parse and validate a VDSR file; malformed files raise typed errors."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16:
        raise Truncated(f"file is {len(blob)} bytes, smaller than any valid header")
    if blob[:4] != MAGIC:
        raise BadMagic(f"magic is {blob[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}, expected {VERSION}")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    if 16 + header_len > len(blob):
        raise Truncated("header extends past end of file")
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ShapeMismatch(f"header is not valid JSON: {e}") from e
    try:
        d, v = int(header["d"]), int(header["v"])
        n_classes = int(header["n_classes"])
        n_train, n_test = int(header["n_train"]), int(header["n_test"])
        class_names = list(header["class_names"])
        verbalizer = {int(c): [int(t) for t in toks]
                      for c, toks in header["verbalizer"].items()}
    except (KeyError, TypeError, ValueError) as e:
        raise ShapeMismatch(f"header missing or malformed field: {e}") from e

    sizes = [d * v * 4, n_train * d * 4, n_train * 4, n_test * d * 4, n_test * 4]
    expected = 16 + header_len + sum(sizes)
    if len(blob) < expected:
        raise Truncated(f"payload is {len(blob) - 16 - header_len} bytes, "
                        f"header declares {sum(sizes)}")
    if len(blob) > expected:
        raise ShapeMismatch(f"{len(blob) - expected} trailing bytes after declared payload")

    off = 16 + header_len
    blocks = []
    for size, dtype in zip(sizes, ["<f4", "<f4", "<u4", "<f4", "<u4"]):
        blocks.append(np.frombuffer(blob, dtype=dtype, count=size // 4, offset=off))
        off += size
    bundle = ReprBundle(
        d=d, v=v, n_classes=n_classes, class_names=class_names, verbalizer=verbalizer,
        lm_head=blocks[0].reshape(d, v),
        train_reps=blocks[1].reshape(n_train, d),
        train_labels=blocks[2].copy(),
        test_reps=blocks[3].reshape(n_test, d),
        test_labels=blocks[4].copy(),
    )
    for arr in (bundle.lm_head, bundle.train_reps, bundle.test_reps):
        if not np.all(np.isfinite(arr)):
            raise NonFinite("stored floats contain NaN or Inf")
    violations = validate_bundle(bundle)
    if violations:
        raise BundleInvalid(violations)
    return bundle


def _qr_canon(M):
    # unique orthogonal factor: flip column signs so diag(R) >= 0
    Q, R = np.linalg.qr(M)
    sign = np.sign(np.diag(R))
    sign[sign == 0] = 1.0
    return Q * sign


def gen_synthetic(spec):
    """Deterministic synthetic bundle, a pure function of the spec.

    Draw order under one Philox stream: head, class tokens, the two mixing
    rotations (only when mix is on), train labels, test labels, train noise,
    test noise. Representations are

        r = A (b_t + eps),   eps ~ N(0, sigma^2 I)

    where b_t is the class token's semantic basis, sigma scales with the RMS
    class-basis norm (sigma = NOISE_REL_SCALE * noise_sigma * rms), and A has
    singular values log-spaced over MIX_DECADES decades between seeded
    rotations (identity when mix is off). Noise in the unmixed space keeps the
    classes separable by construction; the spectrum of A is what makes raw
    cosine scoring nearly blind until a model learns to undo it.
    """
    bad = spec.violations()
    if bad:
        raise BundleInvalid(bad)
    rng = np.random.Generator(np.random.Philox(spec.seed))
    d, v, C = spec.d, spec.v, spec.n_classes
    W = rng.standard_normal((d, v)).astype(np.float32)
    B = _basis.pseudoinverse(W)
    tokens = rng.choice(v, size=C, replace=False)
    if spec.mix:
        Q1 = _qr_canon(rng.standard_normal((d, d)))
        Q2 = _qr_canon(rng.standard_normal((d, d)))
        A = Q1 @ np.diag(np.logspace(0.0, -MIX_DECADES, d)) @ Q2.T
    else:
        A = np.eye(d)
    rms = np.sqrt((np.linalg.norm(B[tokens], axis=1) ** 2).mean())
    sigma = NOISE_REL_SCALE * spec.noise_sigma * rms
    ytr = rng.integers(0, C, size=spec.n_train).astype(np.uint32)
    yte = rng.integers(0, C, size=spec.n_test).astype(np.uint32)
    Xtr = ((B[tokens[ytr]] + sigma * rng.standard_normal((spec.n_train, d))) @ A.T
           ).astype(np.float32)
    Xte = ((B[tokens[yte]] + sigma * rng.standard_normal((spec.n_test, d))) @ A.T
           ).astype(np.float32)
    return ReprBundle(
        d=d, v=v, n_classes=C,
        class_names=[f"class_{c}" for c in range(C)],
        verbalizer={c: [int(tokens[c])] for c in range(C)},
        lm_head=W,
        train_reps=Xtr, train_labels=ytr,
        test_reps=Xte, test_labels=yte,
    )

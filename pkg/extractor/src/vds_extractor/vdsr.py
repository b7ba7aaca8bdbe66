"""Standalone VDSR writer (and a reader for self-checks).

This package deliberately does not import the vds toolkit; the file format
below is the interface between the two. Layout:

    magic "VDSR" (4 bytes)
    version      u32 LE = 1
    header_len   u64 LE
    JSON header  {"d","v","n_classes","class_names","verbalizer",
                  "n_train","n_test","dtype":"f32","layout":"row-major"}
                 (canonical: sorted keys, no whitespace, UTF-8)
    lm_head      d*v f32 LE, row-major
    train_reps   n_train*d f32 LE
    train_labels n_train u32 LE
    test_reps    n_test*d f32 LE
    test_labels  n_test u32 LE

No padding between blocks. Verbalizer keys are stringified class ids.
"""

import json
import struct

import numpy as np

from .errors import DataError

MAGIC = b"VDSR"
VERSION = 1


def write_vdsr(path, lm_head, train_reps, train_labels, test_reps,
               test_labels, class_names, verbalizer):
    """Serialize one bundle; identical inputs produce identical bytes.

    lm_head is d x v (latent dim by vocabulary). verbalizer maps class id
    (int, 0..C-1) to a nonempty list of token ids, all < v.
    """
    lm_head = np.ascontiguousarray(lm_head, dtype="<f4")
    train_reps = np.ascontiguousarray(train_reps, dtype="<f4")
    test_reps = np.ascontiguousarray(test_reps, dtype="<f4")
    train_labels = np.ascontiguousarray(train_labels, dtype="<u4")
    test_labels = np.ascontiguousarray(test_labels, dtype="<u4")

    d, v = lm_head.shape
    n_classes = len(class_names)
    problems = []
    if train_reps.ndim != 2 or train_reps.shape[1] != d:
        problems.append("train_reps shape")
    if test_reps.ndim != 2 or test_reps.shape[1] != d:
        problems.append("test_reps shape")
    if train_labels.shape != (train_reps.shape[0],):
        problems.append("train_labels length")
    if test_labels.shape != (test_reps.shape[0],):
        problems.append("test_labels length")
    if train_reps.shape[0] < 1 or test_reps.shape[0] < 1:
        problems.append("empty split")
    if sorted(verbalizer) != list(range(n_classes)):
        problems.append("verbalizer keys")
    if any(len(toks) < 1 for toks in verbalizer.values()):
        problems.append("empty verbalizer entry")
    if any(not (0 <= int(t) < v) for toks in verbalizer.values() for t in toks):
        problems.append("token id out of range")
    for name, arr in (("lm_head", lm_head), ("train_reps", train_reps),
                      ("test_reps", test_reps)):
        if not np.all(np.isfinite(arr)):
            problems.append(f"non-finite {name}")
    for name, lab in (("train", train_labels), ("test", test_labels)):
        if lab.size and int(lab.max()) >= n_classes:
            problems.append(f"{name} label out of range")
    if problems:
        raise DataError("refusing to write invalid bundle: " + "; ".join(problems))

    header = {
        "d": int(d),
        "v": int(v),
        "n_classes": int(n_classes),
        "class_names": [str(c) for c in class_names],
        "verbalizer": {str(c): [int(t) for t in toks]
                       for c, toks in sorted(verbalizer.items())},
        "n_train": int(train_reps.shape[0]),
        "n_test": int(test_reps.shape[0]),
        "dtype": "f32",
        "layout": "row-major",
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(lm_head.tobytes())
        f.write(train_reps.tobytes())
        f.write(train_labels.tobytes())
        f.write(test_reps.tobytes())
        f.write(test_labels.tobytes())


def read_vdsr(path):
    """Parse a VDSR file back into (header dict, arrays dict). Used by our
    tests to round-trip what the writer produced; the authoritative consumer
    is the vds toolkit."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise DataError(f"bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise DataError(f"unsupported version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    d, v = header["d"], header["v"]
    n_train, n_test = header["n_train"], header["n_test"]
    off = 16 + header_len
    out = {}
    for name, dtype, count, shape in (
            ("lm_head", "<f4", d * v, (d, v)),
            ("train_reps", "<f4", n_train * d, (n_train, d)),
            ("train_labels", "<u4", n_train, (n_train,)),
            ("test_reps", "<f4", n_test * d, (n_test, d)),
            ("test_labels", "<u4", n_test, (n_test,))):
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        out[name] = arr.reshape(shape)
        off += arr.nbytes
    if off != len(blob):
        raise DataError(f"{len(blob) - off} trailing bytes")
    return header, out

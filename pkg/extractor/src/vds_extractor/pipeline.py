"""Zero-shot extraction: prompts in, VDSR bundle out.

For every sample the prompt template is filled with the sample text, the
model runs one forward pass, and the final layer's hidden state at the last
(non-padding) position is recorded as that sample's representation. The
output projection is exported as the bundle's head matrix; before anything
is written, an orientation probe recomputes logits as hidden @ head for the
first few samples and insists they match the runtime's own logits, which
catches transposed exports, wrong tensors, and bias-bearing heads.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .datasets import load_dataset
from .errors import (DatasetError, OrientationMismatch, TemplateInvalid,
                     UsageError, VerbalizerInvalid)
from .model_io import export_head, forward_last_position, load_model
from .tokenizer import resolve_verbalizer
from .vdsr import write_vdsr

PLACEHOLDER = "{text}"
N_PROBES = 8
PROBE_TOL = 1e-2


@dataclass
class ExtractSpec:
    model_id: str
    dataset_id: str
    template: str             # prompt text containing {text} exactly once
    verbalizer: dict          # class name -> label string, order fixes ids
    n_train: int
    n_test: int
    seed: int = 42

    def check(self):
        if self.template.count(PLACEHOLDER) != 1:
            raise TemplateInvalid(
                f"template must contain {PLACEHOLDER} exactly once, "
                f"found {self.template.count(PLACEHOLDER)}")
        if not self.verbalizer:
            raise VerbalizerInvalid("verbalizer maps no classes")
        if any(not str(lab).strip() for lab in self.verbalizer.values()):
            raise VerbalizerInvalid("empty label string")
        if self.n_train < 1 or self.n_test < 1:
            raise UsageError("n_train and n_test must be positive")


def _stratified_split(rows, class_of, n_train, n_test, seed):
    """Seeded per-class shuffle, then round-robin across classes so both
    splits stay as balanced as the counts allow."""
    rng = np.random.Generator(np.random.Philox(seed))
    pools = {c: [] for c in range(len(set(class_of.values())))}
    for i, (_, name) in enumerate(rows):
        pools[class_of[name]].append(i)
    for c in pools:
        pools[c] = [pools[c][j] for j in rng.permutation(len(pools[c]))]
    order = []
    cursors = {c: 0 for c in pools}
    while len(order) < n_train + n_test:
        progressed = False
        for c in sorted(pools):
            if cursors[c] < len(pools[c]) and len(order) < n_train + n_test:
                order.append(pools[c][cursors[c]])
                cursors[c] += 1
                progressed = True
        if not progressed:
            raise DatasetError(
                f"dataset holds {len(rows)} samples, "
                f"need {n_train + n_test}")
    return order[:n_train], order[n_train:n_train + n_test]


def _encode(tokenizer, text):
    try:
        ids = tokenizer.encode(text, add_special_tokens=False)
    except TypeError:
        ids = tokenizer.encode(text)
    if not ids:
        raise DatasetError(f"prompt tokenized to nothing: {text!r}")
    return ids


def extract(spec, out_path):
    """Run the pipeline and write a VDSR bundle. Returns a summary dict."""
    spec.check()
    rows = load_dataset(spec.dataset_id)

    class_names = list(spec.verbalizer)
    class_of = {name: c for c, name in enumerate(class_names)}
    unknown = sorted({name for _, name in rows} - set(class_names))
    if unknown:
        raise DatasetError(f"dataset labels {unknown} missing from verbalizer")

    model, tokenizer, source = load_model(spec.model_id, spec.seed)
    head = export_head(model)
    d, v = head.shape

    verbalizer_ids = {}
    for c, name in enumerate(class_names):
        ids = resolve_verbalizer(tokenizer, spec.verbalizer[name])
        if any(t >= v for t in ids):
            raise VerbalizerInvalid(f"label {spec.verbalizer[name]!r} resolved "
                                    f"to ids outside the vocabulary ({v})")
        verbalizer_ids[c] = ids

    train_idx, test_idx = _stratified_split(rows, class_of, spec.n_train,
                                            spec.n_test, spec.seed)

    def represent(indices):
        reps, labels, logit_probes = [], [], []
        for i in indices:
            text, name = rows[i]
            prompt = spec.template.replace(PLACEHOLDER, text)
            hidden, logits = forward_last_position(model,
                                                   _encode(tokenizer, prompt))
            reps.append(hidden)
            labels.append(class_of[name])
            if len(logit_probes) < N_PROBES:
                logit_probes.append(logits)
        return (np.stack(reps), np.asarray(labels, dtype=np.uint32),
                logit_probes)

    train_reps, train_labels, probes = represent(train_idx)
    test_reps, test_labels, _ = represent(test_idx)

    # Orientation probe on the arrays exactly as they will be stored (f32).
    head32 = head.astype(np.float32)
    reps32 = train_reps.astype(np.float32)
    mm = reps32[:len(probes)].astype(np.float64) @ head32.astype(np.float64)
    probe_diff = float(np.abs(mm - np.asarray(probes, dtype=np.float64)).max())
    if probe_diff >= PROBE_TOL:
        raise OrientationMismatch(
            f"hidden @ head differs from runtime logits by {probe_diff:.3e} "
            f"(tolerance {PROBE_TOL}); head export is wrong for this model")

    write_vdsr(out_path, head32, reps32, train_labels,
               test_reps.astype(np.float32), test_labels,
               class_names, verbalizer_ids)
    return {
        "out": str(out_path),
        "model": source,
        "d": int(d),
        "v": int(v),
        "n_train": int(spec.n_train),
        "n_test": int(spec.n_test),
        "probe_max_abs_diff": probe_diff,
        "head_sha256": hashlib.sha256(head32.tobytes()).hexdigest(),
    }

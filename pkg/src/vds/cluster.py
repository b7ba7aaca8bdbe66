"""Trainable clustering module with hand-derived gradients.

The module maps a representation r through a channel-attention gate, an MLP,
and layer normalization:

    lambda(r) = LN(MLP(r * CA(r)))
    CA(r)     = sigmoid(Bn(avg r) + Bn(max r)) = sigmoid(2 * Bn(r))
    Bn(x)     = relu(x @ ca_w1) @ ca_w2            (shared, bias-free, d -> d/16 -> d)
    MLP(h)    = relu(h @ mlp_w1 + mlp_b1) @ mlp_w2 + mlp_b2   (d -> 2d -> d)
    LN(m)     = ln_gain * (m - mean m) / sqrt(var m + 1e-5) + ln_bias

Pooling over a single vector is the identity, so the two pooled branches of
the gate coincide and the gate reduces to sigmoid(2 Bn(r)). Training pulls
lambda(r) toward the ground-truth class's semantic basis under one of five
loss modes; gradients are written out analytically (no autograd) and verified
against central finite differences.

Weight count excluding biases and LN affine is 4 d^2 (MLP) + d^2 / 8 (gate
bottleneck) = 33/8 d^2.
"""

import json
import struct
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .basis import class_bases_matrix
from .errors import (BadMagic, DivergedAtStep, ShapeMismatch, Truncated,
                     UnsupportedVersion, UsageError, ZeroVector)
from .logits import LogitsMode

MODULE_MAGIC = b"VDSM"
MODULE_VERSION = 1

LN_EPS = 1e-5

FULL_VOCABULARY = "full-vocabulary"
LABEL_TOKENS_ONLY = "label-tokens"


@dataclass
class ClusterParams:
    """Module weights. Field order is the serialization order."""

    ca_w1: np.ndarray   # d x d/16
    ca_w2: np.ndarray   # d/16 x d
    mlp_w1: np.ndarray  # d x 2d
    mlp_b1: np.ndarray  # 2d
    mlp_w2: np.ndarray  # 2d x d
    mlp_b2: np.ndarray  # d
    ln_gain: np.ndarray  # d
    ln_bias: np.ndarray  # d

    @property
    def d(self):
        return self.ca_w1.shape[0]

    def weight_count(self):
        """Weight-matrix entries only; biases and LN affine excluded."""
        return (self.ca_w1.size + self.ca_w2.size
                + self.mlp_w1.size + self.mlp_w2.size)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def all_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.as_dict().values())

    def copy(self):
        return ClusterParams(**{k: v.copy() for k, v in self.as_dict().items()})


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    seed: int = 42
    learning_rate: float = 1e-3
    mode: LogitsMode = LogitsMode.SIM_ALL
    tau: float = 10.0
    loss_support: str = FULL_VOCABULARY

    def check(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError("epochs and batch_size must be at least 1")
        if self.learning_rate < 0 or self.tau <= 0:
            raise UsageError("learning_rate must be nonnegative and tau positive")
        if self.loss_support not in (FULL_VOCABULARY, LABEL_TOKENS_ONLY):
            raise UsageError(f"unknown loss support {self.loss_support!r}")


@dataclass
class TrainReport:
    mode: str
    epoch_losses: list = field(default_factory=list)
    final_train_accuracy: float = 0.0
    final_test_accuracy: float = 0.0
    param_count: int = 0
    wall_time_s: float = 0.0


def init_params(d, seed):
    """Seeded init: weights uniform scaled by 1/sqrt(fan_in), biases zero,
    LN gain one. Draw order: ca_w1, ca_w2, mlp_w1, mlp_w2."""
    if d % 16 != 0:
        raise UsageError(f"latent dimension {d} is not divisible by 16")
    rng = np.random.Generator(np.random.Philox(seed))
    dk = d // 16

    def u(shape, fan):
        return rng.uniform(-1.0, 1.0, size=shape) / np.sqrt(fan)

    return ClusterParams(
        ca_w1=u((d, dk), d),
        ca_w2=u((dk, d), dk),
        mlp_w1=u((d, 2 * d), d),
        mlp_b1=np.zeros(2 * d),
        mlp_w2=u((2 * d, d), 2 * d),
        mlp_b2=np.zeros(d),
        ln_gain=np.ones(d),
        ln_bias=np.zeros(d),
    )


def _sigmoid(x):
    # saturation via exp overflow is the correct limit (inf -> gate 0), so
    # the warning is silenced rather than the arithmetic rearranged; any
    # rearrangement changes last-ulp rounding and thus training trajectories
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _forward(p, R):
    """Batched forward pass returning output and the backward cache.

    Non-finite parameters are allowed to propagate silently here; the callers
    that care (module_forward, the training loop) check the result and raise
    DivergedAtStep, so the intermediate FP warnings are pure noise.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        pre1 = R @ p.ca_w1
        Z1 = np.maximum(pre1, 0.0)
        Bn = Z1 @ p.ca_w2
        gate = _sigmoid(2.0 * Bn)
        H = R * gate
        U1 = H @ p.mlp_w1 + p.mlp_b1
        A1 = np.maximum(U1, 0.0)
        M = A1 @ p.mlp_w2 + p.mlp_b2
        mu = M.mean(axis=1, keepdims=True)
        var = M.var(axis=1, keepdims=True)
        sd = np.sqrt(var + LN_EPS)
        xhat = (M - mu) / sd
        out = xhat * p.ln_gain + p.ln_bias
    return out, (R, pre1, Z1, Bn, gate, H, U1, A1, M, xhat, sd)


def ca_forward(params, r):
    """Channel-attention gate alone; every entry lies strictly in (0, 1)."""
    r = np.atleast_2d(np.asarray(r, dtype=np.float64))
    pre1 = r @ params.ca_w1
    Bn = np.maximum(pre1, 0.0) @ params.ca_w2
    gate = _sigmoid(2.0 * Bn)
    return gate[0] if gate.shape[0] == 1 else gate


def module_forward(params, r):
    """lambda(r) for a single representation."""
    out, _ = _forward(params, np.atleast_2d(np.asarray(r, dtype=np.float64)))
    if not np.all(np.isfinite(out)):
        raise DivergedAtStep(-1, "non-finite forward output")
    return out[0]


def transform_all(params, reps):
    """Row-wise module_forward; the input is left untouched."""
    out, _ = _forward(params, np.asarray(reps, dtype=np.float64))
    return out


def _backward(p, cache, d_out):
    """Gradients of a scalar loss through the forward cache. Returns a dict
    keyed like ClusterParams. The double path through H = R * gate is why the
    gate factor 2.0 appears: d gate / d Bn = 2 sigmoid'(2 Bn)."""
    R, pre1, Z1, Bn, gate, H, U1, A1, M, xhat, sd = cache
    g = {}
    g["ln_gain"] = (d_out * xhat).sum(axis=0)
    g["ln_bias"] = d_out.sum(axis=0)
    dxhat = d_out * p.ln_gain
    dM = (dxhat - dxhat.mean(axis=1, keepdims=True)
          - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)) / sd
    g["mlp_w2"] = A1.T @ dM
    g["mlp_b2"] = dM.sum(axis=0)
    dA1 = dM @ p.mlp_w2.T
    dU1 = dA1 * (U1 > 0)
    g["mlp_w1"] = H.T @ dU1
    g["mlp_b1"] = dU1.sum(axis=0)
    dH = dU1 @ p.mlp_w1.T
    dBn = dH * R * gate * (1.0 - gate) * 2.0
    g["ca_w2"] = Z1.T @ dBn
    dZ1 = (dBn @ p.ca_w2.T) * (pre1 > 0)
    g["ca_w1"] = R.T @ dZ1
    return g


def _first_tokens(bundle):
    return np.array([bundle.verbalizer[c][0] for c in range(bundle.n_classes)],
                    dtype=np.int64)


def _agg_matrix(bundle):
    # v x C matrix averaging each class's verbalizer-token logits
    agg = np.zeros((bundle.v, bundle.n_classes))
    for c in range(bundle.n_classes):
        toks = bundle.verbalizer[c]
        agg[np.asarray(toks, dtype=np.int64), c] = 1.0 / len(toks)
    return agg


def _loss_and_grad(p, reps, labels, bases, bundle, mode, tau, loss_support):
    """Mean loss over the batch and its analytic parameter gradients.

    Support handling: exp normalization (when the mode asks for it) is applied
    to the full logits vector first, then the support restriction, then the
    tau-scaled softmax cross-entropy. sim-gt ignores the support entirely.
    """
    mode = LogitsMode(mode)
    R = np.asarray(reps, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n = R.shape[0]
    if n == 0:
        raise ShapeMismatch("empty batch")
    out, cache = _forward(p, R)

    if mode is LogitsMode.SIM_GT:
        cb_all = class_bases_matrix(bases, bundle.verbalizer, bundle.n_classes)
        cb = cb_all[y]
        cbn = np.linalg.norm(cb, axis=1, keepdims=True)
        on = np.linalg.norm(out, axis=1, keepdims=True)
        if np.any(on == 0.0) or np.any(cbn == 0.0):
            raise ZeroVector("zero-norm vector in cosine loss")
        cos = (out * cb).sum(axis=1, keepdims=True) / (on * cbn)
        loss = float((1.0 - cos).mean())
        dcos = -np.full((n, 1), 1.0 / n)
        d_out = dcos * (cb / (on * cbn) - cos * out / on ** 2)
        return loss, _backward(p, cache, d_out)

    # raw full-vocabulary logits and their backward map
    if mode.base_mode is LogitsMode.SIM_ALL:
        anchors = np.asarray(bases.bases, dtype=np.float64)
        an = anchors / np.linalg.norm(anchors, axis=1, keepdims=True)
        on = np.linalg.norm(out, axis=1, keepdims=True)
        if np.any(on == 0.0):
            raise ZeroVector("zero-norm module output in cosine loss")
        un = out / on
        Z = un @ an.T

        def back_to_out(dZ):
            return (dZ @ an - (dZ * Z).sum(axis=1, keepdims=True) * un) / on
    else:
        W = np.asarray(bundle.lm_head, dtype=np.float64)
        Z = out @ W

        def back_to_out(dZ):
            return dZ @ W.T

    if loss_support == FULL_VOCABULARY:
        targets = _first_tokens(bundle)[y]
        agg = None
    else:
        targets = y
        agg = _agg_matrix(bundle)

    if mode.is_exp:
        Y = _softmax(Z)
        L = Y if agg is None else Y @ agg
    else:
        L = Z if agg is None else Z @ agg

    P = _softmax(tau * L)
    loss = float(-np.log(P[np.arange(n), targets] + 1e-300).mean())
    dL = P.copy()
    dL[np.arange(n), targets] -= 1.0
    dL *= tau / n
    if agg is not None:
        dL = dL @ agg.T
    if mode.is_exp:
        dZ = Y * (dL - (dL * Y).sum(axis=1, keepdims=True))
    else:
        dZ = dL
    return loss, _backward(p, cache, back_to_out(dZ))


def _softmax(Z):
    e = np.exp(Z - Z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def loss(params, reps, labels, bases, bundle, mode, tau=10.0,
         loss_support=FULL_VOCABULARY):
    """Mean batch loss under the given mode; see _loss_and_grad."""
    value, _ = _loss_and_grad(params, reps, labels, bases, bundle, mode, tau,
                              loss_support)
    return value


def grad(params, reps, labels, bases, bundle, mode, tau=10.0,
         loss_support=FULL_VOCABULARY):
    """Analytic gradients of the mean batch loss for every parameter group."""
    _, g = _loss_and_grad(params, reps, labels, bases, bundle, mode, tau,
                          loss_support)
    return g


def _eval_mode(mode):
    # sim-gt is a training loss only; its module is scored with sim-all
    mode = LogitsMode(mode)
    return LogitsMode.SIM_ALL if mode is LogitsMode.SIM_GT else mode


def evaluate_accuracy(params, bundle, bases, mode, split="test"):
    """Accuracy of the transformed representations under the mode's own
    prediction rule (sim modes score cosine to class bases, matmul modes score
    class-token head columns)."""
    from .logits import predict_all
    from .metrics import accuracy
    reps = bundle.test_reps if split == "test" else bundle.train_reps
    truth = bundle.test_labels if split == "test" else bundle.train_labels
    transformed = transform_all(params, reps)
    pred = predict_all(transformed, bundle, bases, _eval_mode(mode))
    return accuracy(pred, truth)


def train(bundle, bases, config=None):
    """Mini-batch training, deterministic under the seed.

    Optimizer: Adam (moments 0.9 / 0.999, eps 1e-8) at the configured learning
    rate, with gradients clipped to global norm 10 before the moment update.
    Parameter init and batch shuffling use two seeded counter-based streams
    (seed and seed + 1) so the trajectory is a pure function of the config.
    Raises DivergedAtStep if the loss or any parameter goes non-finite.
    """
    config = config or TrainConfig()
    config.check()
    t_start = time.perf_counter()
    p = init_params(bundle.d, config.seed)
    shuffle_rng = np.random.Generator(np.random.Philox(config.seed + 1))
    X = np.asarray(bundle.train_reps, dtype=np.float64)
    y = np.asarray(bundle.train_labels, dtype=np.int64)
    n = X.shape[0]

    m = {k: np.zeros_like(v) for k, v in p.as_dict().items()}
    v2 = {k: np.zeros_like(v) for k, v in p.as_dict().items()}
    step = 0
    lr = config.learning_rate
    epoch_losses = []
    for _ in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        total = 0.0
        for i in range(0, n, config.batch_size):
            idx = perm[i:i + config.batch_size]
            batch_loss, g = _loss_and_grad(p, X[idx], y[idx], bases, bundle,
                                           config.mode, config.tau,
                                           config.loss_support)
            if not np.isfinite(batch_loss):
                raise DivergedAtStep(step, "non-finite loss")
            total += batch_loss * len(idx)
            gnorm = np.sqrt(sum(float((gi ** 2).sum()) for gi in g.values()))
            if gnorm > 10.0:
                for k in g:
                    g[k] *= 10.0 / gnorm
            step += 1
            for k in g:
                m[k] = 0.9 * m[k] + 0.1 * g[k]
                v2[k] = 0.999 * v2[k] + 0.001 * g[k] ** 2
                update = (m[k] / (1.0 - 0.9 ** step)) / (
                    np.sqrt(v2[k] / (1.0 - 0.999 ** step)) + 1e-8)
                arr = getattr(p, k)
                arr -= lr * update
            if not p.all_finite():
                raise DivergedAtStep(step, "non-finite parameter")
        epoch_losses.append(total / n)

    report = TrainReport(
        mode=LogitsMode(config.mode).value,
        epoch_losses=epoch_losses,
        final_train_accuracy=evaluate_accuracy(p, bundle, bases, config.mode, "train"),
        final_test_accuracy=evaluate_accuracy(p, bundle, bases, config.mode, "test"),
        param_count=p.weight_count(),
        wall_time_s=time.perf_counter() - t_start,
    )
    return p, report


def save_module(params, path, mode, tau, seed, epochs):
    """Persist trained weights: magic VDSM, version, header length, JSON
    header {d, mode, tau, seed, epochs}, then the parameter blocks as f32
    little-endian in field order."""
    header = json.dumps(
        {"d": int(params.d), "mode": LogitsMode(mode).value, "tau": float(tau),
         "seed": int(seed), "epochs": int(epochs)},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODULE_MAGIC)
        f.write(struct.pack("<I", MODULE_VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for name, arr in params.as_dict().items():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_module(path):
    """Read a VDSM file back into (ClusterParams, header dict)."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16:
        raise Truncated(f"file is {len(blob)} bytes, smaller than any valid header")
    if blob[:4] != MODULE_MAGIC:
        raise BadMagic(f"magic is {blob[:4]!r}, expected {MODULE_MAGIC!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != MODULE_VERSION:
        raise UnsupportedVersion(f"version {version}, expected {MODULE_VERSION}")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    if 16 + header_len > len(blob):
        raise Truncated("header extends past end of file")
    header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    d = int(header["d"])
    dk = d // 16
    shapes = [("ca_w1", (d, dk)), ("ca_w2", (dk, d)),
              ("mlp_w1", (d, 2 * d)), ("mlp_b1", (2 * d,)),
              ("mlp_w2", (2 * d, d)), ("mlp_b2", (d,)),
              ("ln_gain", (d,)), ("ln_bias", (d,))]
    need = sum(int(np.prod(s)) for _, s in shapes) * 4
    have = len(blob) - 16 - header_len
    if have < need:
        raise Truncated(f"parameter payload is {have} bytes, need {need}")
    if have > need:
        raise ShapeMismatch(f"{have - need} trailing bytes after parameters")
    off = 16 + header_len
    arrays = {}
    for name, shape in shapes:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(blob, dtype="<f4", count=count,
                                     offset=off).astype(np.float64).reshape(shape)
        off += count * 4
    return ClusterParams(**arrays), header

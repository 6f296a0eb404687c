"""Encoder-based stop/go predictors.

Two variants share one architecture and differ only in where attention
keys come from: the generic variant projects the common feature window,
the personalized variant projects the driver's 5-element statistics
vector (replicated across positions, no positional code).  Queries and
values always come from the common window.

With replicated keys, scaled-dot attention rows are provably uniform
(softmax of a constant row), so the plain personalized variant cannot
route driver information into the output; `Hyper.k_mix` mixes the common
embedding into the key source and row-standardizes it, which breaks the
softmax shift-invariance and gives the statistics vector real leverage.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from dataclasses import dataclass, asdict, field

import numpy as np

from ..dataset import DatasetMeta, Sample, apply_norm
from ..rng import Xoshiro256, derive_seed
from .autograd import Tensor, concat_last

PERSONALIZED = "personalized"
GENERIC = "generic"

COMMON_DIM = 3
PERSONAL_DIM = 5


class NumericError(RuntimeError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyper:
    d_model: int = 32
    heads: int = 2
    layers: int = 2
    d_ff: int = 64
    dropout: float = 0.0
    lr: float = 6e-3
    lr_decay: float = 0.99         # multiplicative per epoch
    epochs: int = 40
    batch_size: int = 300
    k_mix: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")


@lru_cache(maxsize=16)
def _positional_encoding_cached(W: int, d_model: int) -> np.ndarray:
    pos = np.arange(W, dtype=np.float64)[:, None]
    i = np.arange(d_model, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * np.floor(i / 2.0)) / d_model)
    pe = np.zeros((W, d_model))
    pe[:, 0::2] = np.sin(angle[:, 0::2])
    pe[:, 1::2] = np.cos(angle[:, 1::2])
    pe.setflags(write=False)
    return pe


def positional_encoding(W: int, d_model: int) -> np.ndarray:
    """Sinusoidal code: even dims sin, odd dims cos."""
    return _positional_encoding_cached(W, d_model)


class ModelParams:
    """Named dense parameter arrays with seedable initialization."""

    def __init__(self, variant: str, hyper: Hyper, init_seed: int):
        if variant not in (PERSONALIZED, GENERIC):
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.hyper = hyper
        self.init_seed = init_seed
        self.tensors: dict[str, Tensor] = {}
        rng = Xoshiro256(derive_seed(init_seed, 0xC0DE))
        d, dff = hyper.d_model, hyper.d_ff

        def dense(name, fan_in, fan_out):
            scale = 1.0 / math.sqrt(fan_in)
            w = np.array([[rng.normal(0.0, scale) for _ in range(fan_out)]
                          for _ in range(fan_in)])
            self.tensors[f"{name}.w"] = Tensor(w)
            self.tensors[f"{name}.b"] = Tensor(np.zeros(fan_out))

        dense("common_embed", COMMON_DIM, d)
        k_in = PERSONAL_DIM if variant == PERSONALIZED else COMMON_DIM
        dense("ksrc_embed", k_in, d)
        for l in range(hyper.layers):
            for proj in ("wq", "wk", "wv", "wo"):
                dense(f"layer{l}.{proj}", d, d)
            self.tensors[f"layer{l}.ln1.g"] = Tensor(np.ones(d))
            self.tensors[f"layer{l}.ln1.b"] = Tensor(np.zeros(d))
            dense(f"layer{l}.ff1", d, dff)
            dense(f"layer{l}.ff2", dff, d)
            self.tensors[f"layer{l}.ln2.g"] = Tensor(np.ones(d))
            self.tensors[f"layer{l}.ln2.b"] = Tensor(np.zeros(d))
        dense("head", d, 1)

    def names(self) -> list[str]:
        return list(self.tensors)

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def finite(self) -> bool:
        return all(np.isfinite(t.data).all() for t in self.tensors.values())

    # ---- checkpoints --------------------------------------------------------

    def to_checkpoint(self) -> dict:
        return {
            "format_version": 1,
            "variant": self.variant,
            "hyper": asdict(self.hyper),
            "init_seed": self.init_seed,
            "params": {
                name: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
                for name, t in self.tensors.items()
            },
        }

    @classmethod
    def from_checkpoint(cls, d: dict) -> "ModelParams":
        if d.get("format_version") != 1:
            raise ValueError(f"unsupported checkpoint version {d.get('format_version')!r}")
        obj = cls(d["variant"], Hyper(**d["hyper"]), d["init_seed"])
        for name, entry in d["params"].items():
            if name not in obj.tensors:
                raise ValueError(f"unknown parameter {name!r} in checkpoint")
            arr = np.array(entry["data"]).reshape(entry["shape"])
            if arr.shape != obj.tensors[name].data.shape:
                raise ValueError(f"shape mismatch for {name!r}")
            obj.tensors[name] = Tensor(arr)
        return obj

    def save(self, path, meta: DatasetMeta | None = None) -> None:
        payload = self.to_checkpoint()
        if meta is not None:
            payload["dataset_meta"] = meta.to_dict()
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> tuple["ModelParams", DatasetMeta | None]:
        with open(path) as fh:
            payload = json.load(fh)
        meta = payload.get("dataset_meta")
        return cls.from_checkpoint(payload), (DatasetMeta.from_dict(meta) if meta else None)


# ---- forward pieces ---------------------------------------------------------

def embed_common(params: ModelParams, xc: Tensor) -> Tensor:
    """(..., W, 3) -> (..., W, d): linear projection plus positional code."""
    W = xc.data.shape[-2]
    proj = xc @ params.tensors["common_embed.w"] + params.tensors["common_embed.b"]
    return proj + Tensor(positional_encoding(W, params.hyper.d_model), requires_grad=False)


def embed_personal(params: ModelParams, xp: Tensor, W: int) -> Tensor:
    """(..., 5) -> (..., W, d): projected once, replicated across positions."""
    proj = xp @ params.tensors["ksrc_embed.w"] + params.tensors["ksrc_embed.b"]
    expanded = proj.reshape(*proj.data.shape[:-1], 1, proj.data.shape[-1])
    return expanded + Tensor(np.zeros((W, 1)), requires_grad=False)


def attention(qsrc: Tensor, ksrc: Tensor, vsrc: Tensor, params: ModelParams,
              layer: int) -> Tensor:
    """Scaled dot-product multi-head attention with an output projection."""
    t = params.tensors
    heads = params.hyper.heads
    d = params.hyper.d_model
    dh = d // heads
    q = qsrc @ t[f"layer{layer}.wq.w"] + t[f"layer{layer}.wq.b"]
    k = ksrc @ t[f"layer{layer}.wk.w"] + t[f"layer{layer}.wk.b"]
    v = vsrc @ t[f"layer{layer}.wv.w"] + t[f"layer{layer}.wv.b"]
    outs = []
    for h in range(heads):
        qh = q.slice_last(h * dh, (h + 1) * dh)
        kh = k.slice_last(h * dh, (h + 1) * dh)
        vh = v.slice_last(h * dh, (h + 1) * dh)
        scores = (qh @ kh.transpose_last()).scale(1.0 / math.sqrt(dh))
        if np.isnan(scores.data).any():
            raise NumericError(f"NaN attention scores in layer {layer}, head {h}")
        outs.append(scores.softmax_last() @ vh)
    return concat_last(outs) @ t[f"layer{layer}.wo.w"] + t[f"layer{layer}.wo.b"]


def attention_weights(qsrc: Tensor, ksrc: Tensor, params: ModelParams,
                      layer: int, head: int) -> np.ndarray:
    """Softmax rows for inspection/tests (no value mixing)."""
    t = params.tensors
    dh = params.hyper.d_model // params.hyper.heads
    q = qsrc @ t[f"layer{layer}.wq.w"] + t[f"layer{layer}.wq.b"]
    k = ksrc @ t[f"layer{layer}.wk.w"] + t[f"layer{layer}.wk.b"]
    qh = q.slice_last(head * dh, (head + 1) * dh)
    kh = k.slice_last(head * dh, (head + 1) * dh)
    scores = (qh @ kh.transpose_last()).scale(1.0 / math.sqrt(dh))
    return scores.softmax_last().data


def forward_batch(params: ModelParams, xc: Tensor, xp: Tensor) -> Tensor:
    """P(go) for a batch: xc (B, W, 3), xp (B, 5) -> (B,)."""
    W = xc.data.shape[-2]
    h = embed_common(params, xc)
    if params.variant == PERSONALIZED:
        ksrc = embed_personal(params, xp, W)
        if params.hyper.k_mix:
            ksrc = (ksrc + h).standardize_last()
    else:
        ksrc = xc @ params.tensors["ksrc_embed.w"] + params.tensors["ksrc_embed.b"]
        ksrc = ksrc + Tensor(positional_encoding(W, params.hyper.d_model), requires_grad=False)
    for l in range(params.hyper.layers):
        t = params.tensors
        attn = attention(h, ksrc, h, params, l)
        h = (h + attn).layer_norm(t[f"layer{l}.ln1.g"], t[f"layer{l}.ln1.b"])
        ff = (h @ t[f"layer{l}.ff1.w"] + t[f"layer{l}.ff1.b"]).relu()
        ff = ff @ t[f"layer{l}.ff2.w"] + t[f"layer{l}.ff2.b"]
        h = (h + ff).layer_norm(t[f"layer{l}.ln2.g"], t[f"layer{l}.ln2.b"])
    pooled = h.mean_axis(h.data.ndim - 2)
    logit = pooled @ params.tensors["head.w"] + params.tensors["head.b"]
    p = logit.sigmoid()
    return p.reshape(*p.data.shape[:-1])


def forward(params: ModelParams, common_seq: np.ndarray, personal: np.ndarray) -> float:
    """Single-sample P(go); P(stop) is 1 - P(go) by construction."""
    p = forward_batch(params, Tensor(common_seq[None, :, :], requires_grad=False),
                      Tensor(personal[None, :], requires_grad=False))
    value = float(p.data[0])
    if not np.isfinite(value):
        raise NumericError("non-finite output probability")
    return value


def bce_loss(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross-entropy with epsilon clamping at 1e-12."""
    y = np.asarray(labels, dtype=np.float64)
    p = probs.clamp(1e-12, 1.0 - 1e-12)
    one = Tensor(np.ones_like(y), requires_grad=False)
    y_t = Tensor(y, requires_grad=False)
    term = p.log() * y_t + (one - p).log() * (one - y_t)
    return term.mean().scale(-1.0)


def compute_gradients(params: ModelParams, xc: np.ndarray, xp: np.ndarray,
                      labels: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Reverse-mode gradients of the mean BCE for every parameter array."""
    params.zero_grad()
    probs = forward_batch(params, Tensor(xc, requires_grad=False),
                          Tensor(xp, requires_grad=False))
    loss = bce_loss(probs, labels)
    loss.backward()
    grads = {}
    for name, t in params.tensors.items():
        grads[name] = np.zeros(t.data.shape) if t.grad is None else t.grad
    return float(loss.data), grads


# ---- training ---------------------------------------------------------------

def samples_to_arrays(samples: list[Sample], meta: DatasetMeta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized (xc, xp, y) arrays using the train-split scaler in meta."""
    xc = np.stack([apply_norm(s.common_seq, meta.common_norm) for s in samples])
    xp = np.stack([apply_norm(s.personal, meta.personal_norm) for s in samples])
    y = np.array([s.label for s in samples], dtype=np.float64)
    return xc, xp, y


class Adam:
    def __init__(self, params: ModelParams, hyper: Hyper):
        self.hyper = hyper
        self.m = {n: np.zeros(t.data.shape) for n, t in params.tensors.items()}
        self.v = {n: np.zeros(t.data.shape) for n, t in params.tensors.items()}
        self.step_count = 0

    def step(self, params: ModelParams, grads: dict[str, np.ndarray], lr: float) -> None:
        h = self.hyper
        self.step_count += 1
        t = self.step_count
        for name in params.names():
            g = grads[name]
            self.m[name] = h.beta1 * self.m[name] + (1 - h.beta1) * g
            self.v[name] = h.beta2 * self.v[name] + (1 - h.beta2) * (g * g)
            m_hat = self.m[name] / (1 - h.beta1 ** t)
            v_hat = self.v[name] / (1 - h.beta2 ** t)
            params.tensors[name].data -= lr * m_hat / (np.sqrt(v_hat) + h.adam_eps)


def train(train_samples: list[Sample], meta: DatasetMeta, hyper: Hyper, seed: int,
          variant: str) -> tuple[ModelParams, list[float]]:
    """Deterministic mini-batch Adam; returns the params and per-epoch loss."""
    if not train_samples:
        raise ValueError("empty training set")
    xc, xp, y = samples_to_arrays(train_samples, meta)
    params = ModelParams(variant, hyper, init_seed=derive_seed(seed, 1))
    shuffle_rng = Xoshiro256(derive_seed(seed, 2))
    opt = Adam(params, hyper)
    n = len(train_samples)
    history = []
    for epoch in range(hyper.epochs):
        lr = hyper.lr * (hyper.lr_decay ** epoch)
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            loss, grads = compute_gradients(params, xc[idx], xp[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            opt.step(params, grads, lr)
            losses.append(loss)
        history.append(sum(losses) / len(losses))
    if not params.finite():
        raise TrainingError(f"non-finite parameters after epoch {hyper.epochs - 1}")
    return params, history


def predict_batch(params: ModelParams, samples: list[Sample], meta: DatasetMeta) -> np.ndarray:
    xc, xp, _ = samples_to_arrays(samples, meta)
    probs = forward_batch(params, Tensor(xc, requires_grad=False),
                          Tensor(xp, requires_grad=False)).data
    if not np.isfinite(probs).all():
        raise NumericError("non-finite prediction probabilities")
    return probs

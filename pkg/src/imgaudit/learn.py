"""Trainable binary detector: logistic / one-hidden-layer MLP, BCE with manual
backprop, Adam, one-cycle schedule, early-stopped training loop, ACC and ROC-AUC."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (DegenerateMetricError, DimensionError, EmptyDatasetError)

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    label: int


@dataclass
class Model:
    """arch 'logistic' or 'mlp'; params keyed by name, all float64 arrays."""

    arch: str
    d: int
    h: int
    params: dict

    def copy(self) -> "Model":
        return Model(self.arch, self.d, self.h,
                     {k: v.copy() for k, v in self.params.items()})


@dataclass(frozen=True)
class TrainConfig:
    lr_max: float = 2e-3
    batch_size: int = 192
    epochs: int = 10
    evals_per_epoch: int = 10
    patience: int = 10
    seed: int = 0
    div_factor: float = 25.0
    final_div_factor: float = 1e4
    pct_start: float = 0.3

    def __post_init__(self):
        if not (0.0 < self.pct_start < 1.0):
            raise DimensionError("pct_start must be in (0,1)")
        for name in ("lr_max", "batch_size", "epochs", "evals_per_epoch",
                     "patience", "div_factor", "final_div_factor"):
            if getattr(self, name) <= 0:
                raise DimensionError(f"{name} must be positive")


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: Model) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in model.params.items()},
                   v={k: np.zeros_like(p) for k, p in model.params.items()})


@dataclass(frozen=True)
class Metrics:
    acc: float
    auc: float


def init_model(arch: str, d: int, h: int = 0, seed: int = 0) -> Model:
    if arch == "logistic":
        return Model("logistic", d, 0,
                     {"w": np.zeros(d), "b": np.zeros(1)})
    if arch == "mlp":
        if h < 1:
            raise DimensionError("mlp needs h >= 1 hidden units")
        g = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(d)
        return Model("mlp", d, h, {
            "W1": g.normal(0.0, scale, size=(h, d)),
            "b1": np.zeros(h),
            "w2": g.normal(0.0, 1.0 / math.sqrt(h), size=h),
            "b2": np.zeros(1),
        })
    raise DimensionError(f"unknown architecture {arch!r}")


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logits(model: Model, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.d:
        raise DimensionError(f"expected {model.d} features, got {X.shape[1]}")
    p = model.params
    if model.arch == "logistic":
        return X @ p["w"] + p["b"][0]
    hidden = np.maximum(X @ p["W1"].T + p["b1"], 0.0)
    return hidden @ p["w2"] + p["b2"][0]


def forward(model: Model, x: np.ndarray) -> float:
    """P(label = 1 | x)."""
    return float(_sigmoid(logits(model, np.atleast_2d(x)))[0])


def forward_batch(model: Model, X: np.ndarray) -> np.ndarray:
    return _sigmoid(logits(model, X))


def _bce(probs: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))


def loss_and_grad(model: Model, batch) -> tuple[float, dict]:
    """Mean BCE over the batch and exact gradients for every parameter."""
    X, y = _stack(batch, model.d)
    n = len(y)
    p = model.params
    if model.arch == "logistic":
        z = X @ p["w"] + p["b"][0]
        probs = _sigmoid(z)
        delta = (probs - y) / n  # dL/dz
        grads = {"w": X.T @ delta, "b": np.array([delta.sum()])}
        return _bce(probs, y), grads
    pre = X @ p["W1"].T + p["b1"]
    hidden = np.maximum(pre, 0.0)
    z = hidden @ p["w2"] + p["b2"][0]
    probs = _sigmoid(z)
    delta = (probs - y) / n
    d_hidden = np.outer(delta, p["w2"]) * (pre > 0)
    grads = {
        "W1": d_hidden.T @ X,
        "b1": d_hidden.sum(axis=0),
        "w2": hidden.T @ delta,
        "b2": np.array([delta.sum()]),
    }
    return _bce(probs, y), grads


def input_grad(model: Model, x: np.ndarray, y: int) -> np.ndarray:
    """Gradient of the single-sample BCE with respect to the input features."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise DimensionError(f"expected feature vector of dim {model.d}")
    p = model.params
    if model.arch == "logistic":
        prob = forward(model, x)
        return (prob - y) * p["w"]
    pre = p["W1"] @ x + p["b1"]
    hidden = np.maximum(pre, 0.0)
    prob = float(_sigmoid(np.array([hidden @ p["w2"] + p["b2"][0]]))[0])
    d_hidden = (prob - y) * p["w2"] * (pre > 0)
    return p["W1"].T @ d_hidden


def _stack(batch, d: int):
    if len(batch) == 0:
        raise EmptyDatasetError("empty batch")
    if isinstance(batch, tuple) and len(batch) == 2:
        X, y = batch
    else:
        X = np.stack([np.asarray(s.features, dtype=np.float64) for s in batch])
        y = np.array([s.label for s in batch], dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != d:
        raise DimensionError(f"expected {d} features, got {X.shape[1]}")
    return X, np.asarray(y, dtype=np.float64)


def adam_step(state: AdamState, params: dict, grads: dict, lr: float):
    """One bias-corrected Adam update; returns fresh (state, params)."""
    if set(params) != set(grads):
        raise DimensionError("params/grads key mismatch")
    t = state.t + 1
    new_m, new_v, new_p = {}, {}, {}
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise DimensionError(f"gradient shape mismatch for {k!r}")
        new_m[k] = state.beta1 * state.m[k] + (1 - state.beta1) * g
        new_v[k] = state.beta2 * state.v[k] + (1 - state.beta2) * g * g
        m_hat = new_m[k] / (1 - state.beta1 ** t)
        v_hat = new_v[k] / (1 - state.beta2 ** t)
        new_p[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return (AdamState(new_m, new_v, t, state.beta1, state.beta2, state.eps), new_p)


def onecycle_lr(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Cosine warmup to lr_max over pct_start, then cosine anneal far below start."""
    if not 0 <= step < total_steps:
        raise DimensionError(f"step {step} outside [0, {total_steps})")
    lr_start = cfg.lr_max / cfg.div_factor
    lr_final = lr_start / cfg.final_div_factor
    warmup = int(round(cfg.pct_start * total_steps))
    if total_steps == 1:
        return cfg.lr_max
    if warmup > 0 and step <= warmup:
        t = step / warmup
        return lr_start + (cfg.lr_max - lr_start) * 0.5 * (1 - math.cos(math.pi * t))
    t = (step - warmup) / max(1, total_steps - 1 - warmup)
    return lr_final + (cfg.lr_max - lr_final) * 0.5 * (1 + math.cos(math.pi * t))


def _eval_batch_indices(n_batches: int, evals_per_epoch: int) -> list[int]:
    """Evenly spaced batch indices at which validation runs (deduplicated)."""
    idx = sorted({max(0, (k + 1) * n_batches // evals_per_epoch - 1)
                  for k in range(evals_per_epoch)})
    return idx


def train(train_set, val_set, arch: str, cfg: TrainConfig, h: int = 0,
          _eval_fn=None):
    """One-cycle Adam training with early stopping on validation accuracy.

    Returns (best model, history). History rows are (step, lr, train_loss,
    val_acc); val_acc is NaN until the first evaluation, then carries the most
    recent value. The best snapshot requires strict improvement; ties keep the
    earlier snapshot. Training halts after `patience` consecutive evaluations
    without improvement.
    """
    Xtr, ytr = _stack(train_set, _dim(train_set))
    Xva, yva = _stack(val_set, _dim(val_set))
    if len(ytr) == 0 or len(yva) == 0:
        raise EmptyDatasetError("train and validation sets must be nonempty")
    model = init_model(arch, Xtr.shape[1], h=h, seed=cfg.seed)
    state = AdamState.for_model(model)
    n = len(ytr)
    n_batches = -(-n // cfg.batch_size)
    total_steps = cfg.epochs * n_batches
    eval_idx = set(_eval_batch_indices(n_batches, cfg.evals_per_epoch))
    rng_ = np.random.default_rng(cfg.seed)

    if _eval_fn is None:
        def _eval_fn(m):
            return accuracy(forward_batch(m, Xva), yva)

    best = model.copy()
    best_acc = -1.0
    stale = 0
    last_val = float("nan")
    history = []
    step = 0
    stop = False
    for _epoch in range(cfg.epochs):
        perm = rng_.permutation(n)
        for bi in range(n_batches):
            sel = perm[bi * cfg.batch_size : (bi + 1) * cfg.batch_size]
            lr = onecycle_lr(step, total_steps, cfg)
            loss, grads = loss_and_grad(model, (Xtr[sel], ytr[sel]))
            state, model.params = adam_step(state, model.params, grads, lr)
            if bi in eval_idx:
                last_val = _eval_fn(model)
                if last_val > best_acc:
                    best_acc = last_val
                    best = model.copy()
                    stale = 0
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        stop = True
            history.append((step, lr, loss, last_val))
            step += 1
            if stop:
                break
        if stop:
            break
    return best, history


def _dim(ds) -> int:
    if isinstance(ds, tuple):
        return ds[0].shape[1]
    if len(ds) == 0:
        raise EmptyDatasetError("empty sample set")
    return len(np.asarray(ds[0].features))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def accuracy(scores, labels) -> float:
    """Fraction with (score >= 0.5) == label; a score of exactly 0.5 predicts 1."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DimensionError("scores/labels length mismatch")
    if scores.size == 0:
        raise EmptyDatasetError("accuracy of empty sample set")
    pred = (scores >= 0.5).astype(np.int64)
    return float(np.mean(pred == labels))


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with half credit for ties, via tied ranks (O(n log n))."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DimensionError("scores/labels length mismatch")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateMetricError("roc_auc needs both classes present")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    ranks = np.empty(len(s), dtype=np.float64)
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        ranks[i : j + 1] = 0.5 * (i + j) + 1.0  # average 1-based rank of the tie run
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[labels[order] == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _sig9(v: float) -> float:
    return float(f"{v:.9g}")


def checkpoint_dict(model: Model, extra: dict | None = None) -> dict:
    doc = {
        "architecture": {"arch": model.arch, "d": model.d, "h": model.h},
        "weights": {k: [_sig9(v) for v in p.reshape(-1)]
                    for k, p in model.params.items()},
        "shapes": {k: list(p.shape) for k, p in model.params.items()},
    }
    if extra:
        doc.update(extra)
    return doc


def save_checkpoint(path: str, model: Model, extra: dict | None = None) -> None:
    with open(path, "w") as f:
        json.dump(checkpoint_dict(model, extra), f, indent=2, sort_keys=True)
        f.write("\n")


def load_checkpoint(path: str) -> tuple[Model, dict]:
    with open(path) as f:
        doc = json.load(f)
    arch = doc["architecture"]
    params = {k: np.array(doc["weights"][k], dtype=np.float64)
              .reshape(doc["shapes"][k]) for k in doc["weights"]}
    return Model(arch["arch"], arch["d"], arch["h"], params), doc


def history_to_csv(history) -> str:
    lines = ["step,lr,train_loss,val_acc"]
    lines += [f"{s},{lr:.9g},{loss:.9g},{acc:.9g}" for s, lr, loss, acc in history]
    return "\n".join(lines) + "\n"

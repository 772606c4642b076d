"""White-box L-infinity PGD against any model exposing input gradients.

Defaults match the one-step attack with alpha = epsilon = 1/255; sign(0) = 0
so a zero-gradient model leaves inputs untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .learn import Metrics, Model, accuracy, forward_batch, input_grad, roc_auc


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 1.0 / 255.0
    step_size: float = 1.0 / 255.0
    steps: int = 1
    clamp_lo: float = 0.0
    clamp_hi: float = 1.0
    seed: int | None = None  # random start inside the epsilon ball when set

    def __post_init__(self):
        if self.epsilon < 0:
            raise DimensionError("epsilon must be >= 0")
        if self.steps >= 1 and self.step_size <= 0:
            raise DimensionError("step_size must be > 0")
        if self.clamp_lo >= self.clamp_hi:
            raise DimensionError("clamp_lo must be < clamp_hi")


def pgd_attack(model: Model, x: np.ndarray, y: int, cfg: AttackConfig) -> np.ndarray:
    """Iterated sign-gradient ascent projected into the epsilon ball and range."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise DimensionError(f"expected feature vector of dim {model.d}")
    if cfg.epsilon == 0.0:
        return x.copy()
    if cfg.seed is not None:
        g = np.random.default_rng(cfg.seed)
        xa = x + g.uniform(-cfg.epsilon, cfg.epsilon, size=x.shape)
        xa = np.clip(xa, cfg.clamp_lo, cfg.clamp_hi)
    else:
        xa = x.copy()
    for _ in range(cfg.steps):
        grad = input_grad(model, xa, y)
        xa = xa + cfg.step_size * np.sign(grad)
        xa = np.clip(xa, x - cfg.epsilon, x + cfg.epsilon)
        xa = np.clip(xa, cfg.clamp_lo, cfg.clamp_hi)
    return xa


def evaluate_attack(model: Model, samples, cfg: AttackConfig) -> tuple[Metrics, Metrics]:
    """ACC/AUC on the original inputs and on their adversarial versions."""
    X = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
    y = np.array([s.label for s in samples])
    X_adv = np.stack([
        pgd_attack(model, x, int(label), cfg) for x, label in zip(X, y)
    ])
    clean_scores = forward_batch(model, X)
    adv_scores = forward_batch(model, X_adv)
    clean = Metrics(accuracy(clean_scores, y), roc_auc(clean_scores, y))
    adv = Metrics(accuracy(adv_scores, y), roc_auc(adv_scores, y))
    return clean, adv


def attack_report_csv(model: Model, samples, cfg: AttackConfig) -> str:
    """Per-sample clean/adversarial probabilities plus a summary line."""
    lines = ["sample,clean_prob,adv_prob,flipped"]
    flips = 0
    for i, s in enumerate(samples):
        x = np.asarray(s.features, dtype=np.float64)
        xa = pgd_attack(model, x, int(s.label), cfg)
        pc = float(forward_batch(model, x[np.newaxis])[0])
        pa = float(forward_batch(model, xa[np.newaxis])[0])
        flipped = int((pc >= 0.5) != (pa >= 0.5))
        flips += flipped
        lines.append(f"{i},{pc:.9g},{pa:.9g},{flipped}")
    lines.append(f"summary,flipped={flips},total={len(samples)},"
                 f"epsilon={cfg.epsilon:.9g}")
    return "\n".join(lines) + "\n"

"""Exact (dense) t-SNE: perplexity calibration by bisection, Student-t
low-dimensional affinities, early exaggeration and a momentum schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DimensionError, NumericError

P_FLOOR = 1e-12


@dataclass(frozen=True)
class EmbedConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_lo: float = 0.5
    momentum_hi: float = 0.8
    momentum_switch: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.perplexity < 1.0:
            raise DimensionError("perplexity must be >= 1")
        if self.iterations < 1:
            raise DimensionError("iterations must be >= 1")


@dataclass(frozen=True)
class EmbeddingResult:
    coords: np.ndarray
    kl_history: np.ndarray
    labels: tuple


def pairwise_sq_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, np.newaxis] + sq[np.newaxis, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _row_affinities(d2_row: np.ndarray, beta: float) -> np.ndarray:
    # shifted exponentials for stability; d2_row excludes the diagonal entry
    e = np.exp(-(d2_row - d2_row.min()) * beta)
    return e / e.sum()


def _row_perplexity(p: np.ndarray) -> float:
    nz = p[p > 0]
    h_bits = -np.sum(nz * np.log2(nz))
    return float(2.0 ** h_bits)


def perplexity_calibrate(distances_sq: np.ndarray, perplexity: float,
                         tol: float = 1e-5, max_iter: int = 64) -> np.ndarray:
    """Conditional affinities p(j|i) with per-row bandwidth bisected so the
    row perplexity 2^H matches the target within tol (best effort after
    max_iter bisections); rows sum to 1 with zero diagonal."""
    D = np.asarray(distances_sq, dtype=np.float64)
    n = D.shape[0]
    if D.ndim != 2 or D.shape[1] != n:
        raise DimensionError("distance matrix must be square")
    if perplexity >= n:
        raise NumericError(f"perplexity {perplexity} must be < n = {n}")
    P = np.zeros((n, n))
    others = ~np.eye(n, dtype=bool)
    for i in range(n):
        d = D[i][others[i]]
        beta = 1.0
        # bracket expansion: larger beta -> smaller perplexity
        lo, hi = 0.0, np.inf
        p = _row_affinities(d, beta)
        for _ in range(max_iter):
            perp = _row_perplexity(p)
            if abs(perp - perplexity) < tol:
                break
            if perp > perplexity:
                lo = beta
                beta = beta * 2.0 if not np.isfinite(hi) else 0.5 * (lo + hi)
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else 0.5 * (lo + hi)
            p = _row_affinities(d, beta)
        P[i][others[i]] = p
    return P


def joint_affinities(distances_sq: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized joint P, floored at 1e-12 off the diagonal."""
    cond = perplexity_calibrate(distances_sq, perplexity)
    n = cond.shape[0]
    P = (cond + cond.T) / (2.0 * n)
    P = np.maximum(P, P_FLOOR)
    np.fill_diagonal(P, 0.0)
    return P


def _q_affinities(Y: np.ndarray):
    num = 1.0 / (1.0 + pairwise_sq_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), P_FLOOR)
    np.fill_diagonal(Q, 0.0)
    return Q, num

def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = _q_affinities(Y)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne_grad(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Gradient of KL(P||Q): 4 sum_j (p_ij - q_ij)(y_i - y_j)/(1 + |y_i-y_j|^2)."""
    Q, num = _q_affinities(Y)
    W = (P - Q) * num
    return 4.0 * ((np.diag(W.sum(axis=1)) - W) @ Y)


def tsne_fit(features: np.ndarray, labels, cfg: EmbedConfig,
             init: np.ndarray | None = None) -> EmbeddingResult:
    """Exact t-SNE to 2 dimensions; deterministic per cfg.seed. An explicit
    (n, 2) `init` overrides the seeded Gaussian initialization."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DimensionError("features must be an (n >= 2, d) matrix")
    n = X.shape[0]
    labels = tuple(labels) if labels is not None else tuple(range(n))
    if len(labels) != n:
        raise DimensionError("labels length must match feature rows")
    D2 = pairwise_sq_distances(X)
    if D2.max() == 0.0:
        raise DegenerateGeometryError("all points identical; nothing to embed")
    eff_perp = min(cfg.perplexity, float(n - 1))
    P = joint_affinities(D2, eff_perp)

    if init is not None:
        Y = np.asarray(init, dtype=np.float64).copy()
        if Y.shape != (n, 2):
            raise DimensionError("init must have shape (n, 2)")
    else:
        g = np.random.default_rng(cfg.seed)
        Y = g.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    kl_history = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        P_eff = P * cfg.early_exaggeration if it < cfg.exaggeration_iters else P
        grad = tsne_grad(P_eff, Y)
        momentum = cfg.momentum_lo if it < cfg.momentum_switch else cfg.momentum_hi
        velocity = momentum * velocity - cfg.learning_rate * grad
        Y = Y + velocity
        kl_history[it] = kl_divergence(P, Y)
    return EmbeddingResult(Y, kl_history, labels)


def embedding_to_csv(result: EmbeddingResult, point_labels=None) -> str:
    """CSV rows `index,dataset,label,x,y`; point_labels are the 0/1 tags."""
    lines = ["index,dataset,label,x,y"]
    for i, ((x, y), ds) in enumerate(zip(result.coords, result.labels)):
        lab = point_labels[i] if point_labels is not None else ""
        lines.append(f"{i},{ds},{lab},{x:.9g},{y:.9g}")
    return "\n".join(lines) + "\n"


def kl_history_to_csv(result: EmbeddingResult) -> str:
    lines = ["iteration,kl"]
    lines += [f"{i},{v:.9g}" for i, v in enumerate(result.kl_history)]
    return "\n".join(lines) + "\n"

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ShapeError

PROB_EPS = 1e-7


@dataclass(frozen=True)
class ClassWeights:
    w0: float = 1.0
    w1: float = 1.0

    def __post_init__(self):
        if not (self.w0 > 0 and self.w1 > 0):
            raise ValueError(f"class weights must be positive, got w0={self.w0}, w1={self.w1}")


def weighted_bce_loss(p, y, w: ClassWeights = ClassWeights()) -> tuple[float, np.ndarray]:
    """Class-weighted binary cross-entropy.

    loss = -(1/N) sum_i [w1 y_i log p_i + w0 (1 - y_i) log(1 - p_i)]

    ``p`` is clamped to [eps, 1 - eps] before the logs. The returned gradient
    is with respect to the logits feeding the sigmoid that produced ``p``:
    (w0 (1 - y) p - w1 y (1 - p)) / N, evaluated at the unclamped ``p``.
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("empty batch")
    if p.shape != y.shape:
        raise ShapeError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    n = p.size
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    loss = -np.sum(w.w1 * y * np.log(pc) + w.w0 * (1.0 - y) * np.log(1.0 - pc)) / n
    grad = (w.w0 * (1.0 - y) * p - w.w1 * y * (1.0 - p)) / n
    return float(loss), grad


def mse_reconstruction_loss(x, x_prime) -> tuple[float, np.ndarray]:
    """Mean squared error over every entry; gradient w.r.t. ``x_prime``."""
    x = np.asarray(x, dtype=np.float64)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    if x.shape != x_prime.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {x_prime.shape}")
    if x.size == 0:
        raise ValueError("empty input")
    diff = x_prime - x
    with np.errstate(over="ignore", invalid="ignore"):  # callers check finiteness
        return float(np.mean(diff * diff)), 2.0 * diff / diff.size

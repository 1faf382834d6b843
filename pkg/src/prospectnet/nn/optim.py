"""SGD with momentum, Adam and AdamW, updating parameter arrays in place.

SGD-momentum uses the classical form::

    v <- mu * v + g
    p <- p - lr * v
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .network import LayerStack, NonFiniteError, ShapeError

KINDS = ("sgd_momentum", "adam", "adamw")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd_momentum"
    learning_rate: float = 1e-4
    momentum: float = 0.92
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {KINDS}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        b1, b2 = self.adam_betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError("adam betas must be in [0, 1)")

    @classmethod
    def adam(cls, learning_rate: float = 1e-3, **kw) -> "OptimizerConfig":
        return cls(kind="adam", learning_rate=learning_rate, **kw)


@dataclass
class OptimizerState:
    step: int = 0
    slots: list[dict[str, np.ndarray]] = field(default_factory=list)


def init_state(params: Sequence[np.ndarray]) -> OptimizerState:
    return OptimizerState(slots=[{} for _ in params])


def optimizer_step(
    params: Sequence[np.ndarray],
    grads: Sequence[Optional[np.ndarray]],
    state: OptimizerState,
    cfg: OptimizerConfig,
) -> None:
    """Apply one update. ``None`` gradients (frozen parameters) are skipped."""
    if len(params) != len(grads) or len(params) != len(state.slots):
        raise ShapeError("params, grads and optimizer state have different lengths")
    for p, g in zip(params, grads):
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")

    state.step += 1
    t = state.step
    lr = cfg.learning_rate
    for p, g, slot in zip(params, grads, state.slots):
        if g is None:
            continue
        if cfg.kind == "sgd_momentum":
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            v = slot.setdefault("v", np.zeros_like(p))
            v *= cfg.momentum
            v += g
            p -= lr * v
            continue

        b1, b2 = cfg.adam_betas
        if cfg.kind == "adam" and cfg.weight_decay:
            g = g + cfg.weight_decay * p
        m = slot.setdefault("m", np.zeros_like(p))
        v = slot.setdefault("v", np.zeros_like(p))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        if cfg.kind == "adamw" and cfg.weight_decay:
            p -= lr * cfg.weight_decay * p
        p -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


class StackOptimizer:
    """Binds an optimizer state to one stack and bumps its version on each step."""

    def __init__(self, stack: LayerStack, cfg: OptimizerConfig):
        self.stack = stack
        self.cfg = cfg
        self.params = stack.parameters()
        self.state = init_state(self.params)

    def step(self, grads: Sequence[Optional[np.ndarray]]) -> None:
        optimizer_step(self.params, grads, self.state, self.cfg)
        self.stack.version += 1

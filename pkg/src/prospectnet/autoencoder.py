"""Symmetric dense autoencoder trained on reconstruction MSE.

Encoder widths: d -> first_width -> first_width/2 -> ... -> encoded_size,
decoder is the exact mirror. Hidden layers use ReLU; the bottleneck and the
reconstruction layer are linear (inputs are z-scored, so outputs must be
unbounded). No batch norm or dropout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .nn import (
    LayerStack,
    NonFiniteError,
    OptimizerConfig,
    StackOptimizer,
    backward,
    build_stack,
    forward,
    mse_reconstruction_loss,
)
from .nn import serialize as ser

log = logging.getLogger(__name__)

SUPPORTED_ENCODED_SIZES = (16, 32, 64, 128)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class AutoencoderConfig:
    encoded_size: int = 32
    first_width: int = 256
    epochs: int = 100
    batch_size: int = 256
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig.adam(1e-3))
    seed: int = 0

    def __post_init__(self):
        if self.encoded_size < 1 or self.first_width < 1:
            raise ValueError("encoded_size and first_width must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


def encoder_widths(input_dim: int, encoded_size: int, first_width: int = 256) -> list[int]:
    widths = [input_dim]
    w = first_width
    while w > encoded_size:
        widths.append(w)
        w //= 2
    widths.append(encoded_size)
    return widths


@dataclass
class AutoencoderModel:
    encoder: LayerStack
    decoder: Optional[LayerStack]  # None for encoder-only exports

    def __post_init__(self):
        if self.decoder is not None and self.decoder.widths != self.encoder.widths[::-1]:
            raise ValueError(
                f"decoder widths {self.decoder.widths} do not mirror encoder widths {self.encoder.widths}"
            )

    @property
    def input_dim(self) -> int:
        return self.encoder.widths[0]

    @property
    def encoded_size(self) -> int:
        return self.encoder.widths[-1]

    @property
    def frozen(self) -> bool:
        return self.encoder.frozen

    def parameters(self) -> list[np.ndarray]:
        params = self.encoder.parameters()
        if self.decoder is not None:
            params = params + self.decoder.parameters()
        return params


def build_autoencoder(input_dim: int, cfg: AutoencoderConfig, rng: np.random.Generator) -> AutoencoderModel:
    widths = encoder_widths(input_dim, cfg.encoded_size, cfg.first_width)
    encoder = build_stack(widths, rng, hidden_activation="relu", output_activation="identity")
    decoder = build_stack(widths[::-1], rng, hidden_activation="relu", output_activation="identity")
    return AutoencoderModel(encoder, decoder)


def train_autoencoder(features: np.ndarray, cfg: AutoencoderConfig = AutoencoderConfig()) -> tuple[AutoencoderModel, list[float]]:
    """Minibatch training on MSE(x, decode(encode(x))).

    Returns the (unfrozen) model and the per-epoch mean reconstruction loss.
    Runs exactly ``cfg.epochs`` epochs; there is no early stopping.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("features must be a non-empty 2-D array")
    n, d = x.shape
    model = build_autoencoder(d, cfg, np.random.default_rng(cfg.seed))
    enc_opt = StackOptimizer(model.encoder, cfg.optimizer)
    dec_opt = StackOptimizer(model.decoder, cfg.optimizer)

    trace = []
    for epoch in range(cfg.epochs):
        order = np.random.default_rng((cfg.seed, 1, epoch)).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            xb = x[order[start : start + cfg.batch_size]]
            try:
                code, enc_cache = forward(model.encoder, xb, mode="train")
                recon, dec_cache = forward(model.decoder, code, mode="train")
            except NonFiniteError as exc:
                raise TrainingError(f"autoencoder diverged in epoch {epoch}: {exc}") from exc
            loss, grad = mse_reconstruction_loss(xb, recon)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite reconstruction loss in epoch {epoch}")
            dec_grads, g_code = backward(model.decoder, dec_cache, grad, need_input_grad=True)
            enc_grads, _ = backward(model.encoder, enc_cache, g_code)
            dec_opt.step(dec_grads)
            enc_opt.step(enc_grads)
            total += loss * xb.shape[0]
        trace.append(total / n)
        log.debug("autoencoder epoch %d: mse %.6f", epoch, trace[-1])
    return model, trace


def encode_batch(model: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    """Eval-mode encoder output, shape (rows, encoded_size)."""
    out, _ = forward(model.encoder, x, mode="eval")
    return out


def reconstruct(model: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    if model.decoder is None:
        raise ValueError("encoder-only model cannot reconstruct")
    out, _ = forward(model.decoder, encode_batch(model, x), mode="eval")
    return out


def freeze(model: AutoencoderModel) -> AutoencoderModel:
    model.encoder.freeze()
    if model.decoder is not None:
        model.decoder.freeze()
    return model


def to_container(model: AutoencoderModel, encoder_only: bool = False, meta: Optional[dict] = None) -> ser.Container:
    stacks = [(ser.ROLE_ENCODER, model.encoder)]
    if model.decoder is not None and not encoder_only:
        stacks.append((ser.ROLE_DECODER, model.decoder))
    return ser.Container(ser.KIND_AUTOENCODER, dict(meta or {}), stacks)


def from_container(c: ser.Container) -> AutoencoderModel:
    encoder = c.stack(ser.ROLE_ENCODER)
    decoder = next((s for role, s in c.stacks if role == ser.ROLE_DECODER), None)
    return AutoencoderModel(encoder, decoder)


def save_autoencoder(path, model: AutoencoderModel, encoder_only: bool = False, meta: Optional[dict] = None) -> None:
    from .io_utils import atomic_write_bytes

    atomic_write_bytes(path, ser.dumps(to_container(model, encoder_only, meta)))


def load_autoencoder(path) -> AutoencoderModel:
    with open(path, "rb") as fh:
        return from_container(ser.loads(fh.read(), expect_kind=ser.KIND_AUTOENCODER))

"""Feed-forward classifier over z = [x, encoder(x)] trained with class-weighted BCE."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .autoencoder import AutoencoderModel, TrainingError, encode_batch
from .autoencoder import from_container as ae_from_container
from .data.dataset import LabeledDataset, inverse_frequency_weights
from .nn import (
    PROB_EPS,
    ClassWeights,
    LayerStack,
    NonFiniteError,
    OptimizerConfig,
    StackOptimizer,
    backward,
    build_stack,
    forward,
    weighted_bce_loss,
)
from .nn import serialize as ser

log = logging.getLogger(__name__)

# hidden widths; every architecture ends in a single sigmoid unit
ARCHITECTURES: dict[str, tuple[int, ...]] = {
    "A512": (512, 256, 128, 64),
    "A2048": (2048, 1024, 512, 256, 128, 64),
    "A4096": (4096, 64),
}


@dataclass(frozen=True)
class TrainConfig:
    architecture: str = "A4096"
    hidden: Optional[tuple[int, ...]] = None  # overrides the named architecture's widths
    optimizer: OptimizerConfig = OptimizerConfig()
    batch_size: int = 256
    epochs: int = 100
    dropout_p: float = 0.5
    batch_norm: bool = True
    class_weights: Optional[ClassWeights] = None  # None: inverse frequency of the training labels
    seed: int = 0

    def __post_init__(self):
        if self.hidden is None and self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}; expected one of {list(ARCHITECTURES)}")
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return self.hidden if self.hidden is not None else ARCHITECTURES[self.architecture]

    @property
    def architecture_id(self) -> str:
        if self.hidden is None:
            return self.architecture
        return "custom-" + "-".join(map(str, self.hidden))


@dataclass
class ClassifierModel:
    encoder: AutoencoderModel
    ffn: LayerStack
    architecture_id: str = "A4096"

    def __post_init__(self):
        if self.ffn.widths[0] != self.encoder.input_dim + self.encoder.encoded_size:
            raise ValueError(
                f"ffn input width {self.ffn.widths[0]} != d + encoded_size "
                f"({self.encoder.input_dim} + {self.encoder.encoded_size})"
            )
        if self.ffn.widths[-1] != 1:
            raise ValueError("ffn must end in a single output unit")

    @property
    def input_dim(self) -> int:
        return self.encoder.input_dim


def ffn_inputs(encoder: AutoencoderModel, x: np.ndarray) -> np.ndarray:
    """z = [x, x_e]."""
    x = np.asarray(x, dtype=np.float64)
    return np.hstack([x, encode_batch(encoder, x)])


def build_classifier(encoder: AutoencoderModel, cfg: TrainConfig, rng: np.random.Generator) -> ClassifierModel:
    widths = [encoder.input_dim + encoder.encoded_size, *cfg.hidden_widths, 1]
    ffn = build_stack(
        widths,
        rng,
        hidden_activation="relu",
        output_activation="sigmoid",
        batch_norm=cfg.batch_norm,
        dropout_p=cfg.dropout_p,
    )
    return ClassifierModel(encoder, ffn, cfg.architecture_id)


def train_classifier(
    data: Union[LabeledDataset, tuple[np.ndarray, np.ndarray]],
    encoder: AutoencoderModel,
    cfg: TrainConfig = TrainConfig(),
) -> tuple[ClassifierModel, list[float]]:
    """Train the ffn on the training rows with the encoder held frozen.

    ``data`` is a LabeledDataset (its train split and class weights are
    used) or an ``(x, y)`` pair. ``cfg.class_weights`` overrides either.
    Returns the model and the per-epoch mean training loss.
    """
    if not encoder.frozen:
        raise ValueError("encoder must be frozen before classifier training")
    if isinstance(data, LabeledDataset):
        x, y = data.train()
        weights = cfg.class_weights or data.class_weights
    else:
        x, y = (np.asarray(a) for a in data)
        weights = cfg.class_weights
    y = y.astype(np.float64).ravel()
    if y.size == 0 or y.min() == y.max():
        raise ValueError("training data must contain both classes")
    if weights is None:
        weights = inverse_frequency_weights(y)

    model = build_classifier(encoder, cfg, np.random.default_rng(cfg.seed))
    z = ffn_inputs(encoder, x)  # encoder is frozen, so z is fixed for the whole run
    opt = StackOptimizer(model.ffn, cfg.optimizer)
    dropout_rng = np.random.default_rng((cfg.seed, 3))
    n = z.shape[0]
    trace = []
    for epoch in range(cfg.epochs):
        order = np.random.default_rng((cfg.seed, 2, epoch)).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            try:
                p, cache = forward(model.ffn, z[idx], mode="train", rng=dropout_rng)
            except NonFiniteError as exc:
                raise TrainingError(f"classifier diverged in epoch {epoch}: {exc}") from exc
            loss, g = weighted_bce_loss(p.ravel(), y[idx], weights)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss in epoch {epoch}")
            grads, _ = backward(model.ffn, cache, g[:, None], grad_is_logits=True)
            opt.step(grads)
            total += loss * idx.size
        trace.append(total / n)
        log.debug("classifier epoch %d: loss %.6f", epoch, trace[-1])
    return model, trace


def predict_proba(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"expected input with {model.input_dim} columns, got shape {x.shape}")
    p, _ = forward(model.ffn, ffn_inputs(model.encoder, x), mode="eval")
    return np.clip(p.ravel(), PROB_EPS, 1.0 - PROB_EPS)


def threshold(probabilities, cutoff: float = 0.5) -> np.ndarray:
    if not 0.0 < cutoff < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    return (np.asarray(probabilities) >= cutoff).astype(np.int8)


def classify(model: ClassifierModel, x: np.ndarray, cutoff: float = 0.5) -> np.ndarray:
    return threshold(predict_proba(model, x), cutoff)


def to_container(model: ClassifierModel, meta: Optional[dict] = None) -> ser.Container:
    meta = dict(meta or {})
    meta["architecture_id"] = model.architecture_id
    return ser.Container(
        ser.KIND_CLASSIFIER,
        meta,
        [(ser.ROLE_ENCODER, model.encoder.encoder), (ser.ROLE_FFN, model.ffn)],
    )


def from_container(c: ser.Container) -> ClassifierModel:
    encoder = ae_from_container(c)
    return ClassifierModel(encoder, c.stack(ser.ROLE_FFN), c.meta.get("architecture_id", "A4096"))


def save_classifier(path, model: ClassifierModel, meta: Optional[dict] = None) -> None:
    from .io_utils import atomic_write_bytes

    atomic_write_bytes(path, ser.dumps(to_container(model, meta)))


def load_classifier(path) -> tuple[ClassifierModel, dict]:
    with open(path, "rb") as fh:
        c = ser.loads(fh.read(), expect_kind=ser.KIND_CLASSIFIER)
    return from_container(c), c.meta

"""Dense layer stacks: forward pass, exact backward pass, parameter bookkeeping.

A stack is a list of ``DenseLayer``. Each hidden layer applies, in order,
linear -> batch-norm (optional) -> activation -> inverted dropout (optional).
All math is float64; batches are 2-D arrays of shape (rows, features).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ACTIVATIONS = ("identity", "relu", "sigmoid")


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class StaleCacheError(RuntimeError):
    pass


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.9
    epsilon: float = 1e-5

    def __post_init__(self):
        if not 0.0 < self.momentum < 1.0:
            raise ValueError(f"batch-norm momentum must be in (0, 1), got {self.momentum}")
        if self.epsilon <= 0:
            raise ValueError("batch-norm epsilon must be positive")
        if np.any(self.running_var < 0):
            raise ValueError("running_var must be non-negative")

    @classmethod
    def fresh(cls, width: int, momentum: float = 0.9, epsilon: float = 1e-5) -> "BatchNormState":
        return cls(
            gamma=np.ones(width),
            beta=np.zeros(width),
            running_mean=np.zeros(width),
            running_var=np.ones(width),
            momentum=momentum,
            epsilon=epsilon,
        )


@dataclass
class DenseLayer:
    weights: np.ndarray  # (in, out)
    bias: np.ndarray  # (out,)
    activation: str = "relu"
    batch_norm: Optional[BatchNormState] = None
    dropout_p: float = 0.0
    frozen: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(
                f"inconsistent layer shapes: weights {self.weights.shape}, bias {self.bias.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.batch_norm is not None and self.batch_norm.gamma.shape != self.bias.shape:
            raise ShapeError("batch-norm width does not match layer width")

    @property
    def in_width(self) -> int:
        return self.weights.shape[0]

    @property
    def out_width(self) -> int:
        return self.weights.shape[1]

    def parameters(self) -> list[np.ndarray]:
        params = [self.weights, self.bias]
        if self.batch_norm is not None:
            params += [self.batch_norm.gamma, self.batch_norm.beta]
        return params


def init_dense(
    in_width: int,
    out_width: int,
    rng: np.random.Generator,
    activation: str = "relu",
    batch_norm: bool = False,
    dropout_p: float = 0.0,
) -> DenseLayer:
    """He-uniform fan-in initialisation, zero bias."""
    limit = np.sqrt(6.0 / in_width)
    weights = rng.uniform(-limit, limit, size=(in_width, out_width))
    return DenseLayer(
        weights=weights,
        bias=np.zeros(out_width),
        activation=activation,
        batch_norm=BatchNormState.fresh(out_width) if batch_norm else None,
        dropout_p=dropout_p,
    )


@dataclass
class LayerStack:
    layers: list[DenseLayer]
    version: int = 0  # bumped on every parameter update; guards against stale caches

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_width != b.in_width:
                raise ShapeError(f"layer widths do not chain: {a.out_width} -> {b.in_width}")

    @property
    def widths(self) -> list[int]:
        if not self.layers:
            return []
        return [self.layers[0].in_width] + [layer.out_width for layer in self.layers]

    @property
    def frozen(self) -> bool:
        return bool(self.layers) and all(layer.frozen for layer in self.layers)

    def freeze(self) -> "LayerStack":
        for layer in self.layers:
            layer.frozen = True
        return self

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def build_stack(
    widths: list[int],
    rng: np.random.Generator,
    hidden_activation: str = "relu",
    output_activation: str = "identity",
    batch_norm: bool = False,
    dropout_p: float = 0.0,
) -> LayerStack:
    """Stack with BN/dropout on hidden layers only; the output layer is plain."""
    layers = []
    n = len(widths) - 1
    for i in range(n):
        last = i == n - 1
        layers.append(
            init_dense(
                widths[i],
                widths[i + 1],
                rng,
                activation=output_activation if last else hidden_activation,
                batch_norm=batch_norm and not last,
                dropout_p=0.0 if last else dropout_p,
            )
        )
    return LayerStack(layers)


@dataclass
class _LayerRecord:
    x_in: np.ndarray
    pre_act: np.ndarray  # input to the activation (after BN if present)
    out: np.ndarray  # activation output, before dropout
    x_hat: Optional[np.ndarray] = None
    inv_std: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None  # already scaled by 1/(1-p)


@dataclass
class ForwardCache:
    stack_id: int
    version: int
    mode: str
    records: list[_LayerRecord] = field(default_factory=list)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return _sigmoid(z)
    return z


def forward(
    stack: LayerStack,
    batch: np.ndarray,
    mode: str = "eval",
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run ``batch`` through ``stack``.

    In ``"train"`` mode batch-norm uses batch statistics and updates its
    running averages (unless the layer is frozen), and dropout draws masks
    from ``rng``. In ``"eval"`` mode the running statistics are used and
    dropout is a no-op.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got shape {x.shape}")
    if stack.layers and x.shape[1] != stack.layers[0].in_width:
        raise ShapeError(f"batch has {x.shape[1]} columns, stack expects {stack.layers[0].in_width}")
    train = mode == "train"
    if train and rng is None and any(layer.dropout_p > 0 for layer in stack.layers):
        raise ValueError("train-mode forward with dropout requires an rng")

    cache = ForwardCache(stack_id=id(stack), version=stack.version, mode=mode)
    for layer in stack.layers:
        z = x @ layer.weights + layer.bias
        rec = _LayerRecord(x_in=x, pre_act=z, out=z)
        bn = layer.batch_norm
        if bn is not None:
            if train:
                mean = z.mean(axis=0)
                var = z.var(axis=0)
                if not layer.frozen:
                    bn.running_mean = bn.momentum * bn.running_mean + (1 - bn.momentum) * mean
                    bn.running_var = bn.momentum * bn.running_var + (1 - bn.momentum) * var
            else:
                mean, var = bn.running_mean, bn.running_var
            inv_std = 1.0 / np.sqrt(var + bn.epsilon)
            x_hat = (z - mean) * inv_std
            rec.x_hat, rec.inv_std = x_hat, inv_std
            rec.pre_act = bn.gamma * x_hat + bn.beta
        a = _activate(rec.pre_act, layer.activation)
        rec.out = a
        if train and layer.dropout_p > 0:
            keep = 1.0 - layer.dropout_p
            rec.mask = (rng.random(a.shape) < keep) / keep
            a = a * rec.mask
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("non-finite activation in forward pass")
        cache.records.append(rec)
        x = a
    return x, cache


def backward(
    stack: LayerStack,
    cache: ForwardCache,
    upstream_grad: np.ndarray,
    grad_is_logits: bool = False,
    need_input_grad: bool = False,
) -> tuple[list[Optional[np.ndarray]], Optional[np.ndarray]]:
    """Backpropagate ``upstream_grad`` through the cached forward pass.

    Returns ``(grads, input_grad)`` where ``grads`` is aligned with
    ``stack.parameters()`` and holds ``None`` for frozen parameters.
    With ``grad_is_logits`` the upstream gradient is taken to be with respect
    to the last layer's pre-activation, skipping that activation's derivative.
    """
    if cache.stack_id != id(stack) or len(cache.records) != len(stack.layers):
        raise StaleCacheError("cache was produced by a different stack")
    if cache.version != stack.version:
        raise StaleCacheError("stack parameters changed since the forward pass")
    if cache.mode != "train":
        raise StaleCacheError("backward requires a train-mode forward cache")

    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != cache.records[-1].out.shape:
        raise ShapeError(f"upstream gradient shape {g.shape} != output shape {cache.records[-1].out.shape}")

    per_layer: list[list[Optional[np.ndarray]]] = []
    n_layers = len(stack.layers)
    for idx in range(n_layers - 1, -1, -1):
        layer, rec = stack.layers[idx], cache.records[idx]
        if rec.mask is not None:
            g = g * rec.mask
        skip_act = grad_is_logits and idx == n_layers - 1
        if not skip_act:
            if layer.activation == "relu":
                g = g * (rec.pre_act > 0)
            elif layer.activation == "sigmoid":
                g = g * rec.out * (1.0 - rec.out)
        bn = layer.batch_norm
        grads: list[Optional[np.ndarray]]
        if bn is not None:
            dgamma = np.sum(g * rec.x_hat, axis=0)
            dbeta = np.sum(g, axis=0)
            n = g.shape[0]
            g = (bn.gamma * rec.inv_std / n) * (n * g - dbeta - rec.x_hat * dgamma)
            bn_grads = [dgamma, dbeta]
        else:
            bn_grads = []
        grads = [rec.x_in.T @ g, g.sum(axis=0)] + bn_grads
        if layer.frozen:
            grads = [None] * len(grads)
        per_layer.append(grads)
        if idx > 0 or need_input_grad:
            g = g @ layer.weights.T
    per_layer.reverse()
    flat = [gr for grads in per_layer for gr in grads]
    return flat, (g if need_input_grad else None)

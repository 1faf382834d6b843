from .losses import PROB_EPS, ClassWeights, mse_reconstruction_loss, weighted_bce_loss
from .network import (
    BatchNormState,
    DenseLayer,
    ForwardCache,
    LayerStack,
    NonFiniteError,
    ShapeError,
    StaleCacheError,
    backward,
    build_stack,
    forward,
    init_dense,
)
from .optim import OptimizerConfig, OptimizerState, StackOptimizer, init_state, optimizer_step

__all__ = [
    "PROB_EPS",
    "BatchNormState",
    "ClassWeights",
    "DenseLayer",
    "ForwardCache",
    "LayerStack",
    "NonFiniteError",
    "OptimizerConfig",
    "OptimizerState",
    "ShapeError",
    "StackOptimizer",
    "StaleCacheError",
    "backward",
    "build_stack",
    "forward",
    "init_dense",
    "init_state",
    "mse_reconstruction_loss",
    "optimizer_step",
    "weighted_bce_loss",
]

from .core import (
    Tensor,
    ShapeError,
    GraphError,
    NonFiniteError,
    no_grad,
    linear_forward,
    conv2d_forward,
    conv_transpose2d_forward,
    batchnorm2d,
    RunningStats,
    relu,
    mse_loss,
    reshape,
    backward,
)
from .rng import Rng
from .optim import AdamState, adam_step, Adam

__all__ = [
    "Tensor",
    "ShapeError",
    "GraphError",
    "NonFiniteError",
    "no_grad",
    "linear_forward",
    "conv2d_forward",
    "conv_transpose2d_forward",
    "batchnorm2d",
    "RunningStats",
    "relu",
    "mse_loss",
    "reshape",
    "backward",
    "Rng",
    "AdamState",
    "adam_step",
    "Adam",
]

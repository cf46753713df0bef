"""
Dense tensor engine: forward primitives, reverse-mode gradients and the
matrix form of convolutions.
"""

from .matrix import conv_as_matrix, flatten, unflatten
from .operators import BatchNormState, ConvOperator
from .ops import (
    accuracy,
    add,
    batch_norm,
    conv2d,
    global_avg_pool,
    identity,
    linear_head,
    relu,
    softmax_cross_entropy,
    sub,
    zeros,
)
from .tape import Tape, backward
from .tensor import Parameter, ParameterRegistry, Precision, Tensor

__all__ = [
    "BatchNormState",
    "ConvOperator",
    "Parameter",
    "ParameterRegistry",
    "Precision",
    "Tape",
    "Tensor",
    "accuracy",
    "add",
    "backward",
    "batch_norm",
    "conv2d",
    "conv_as_matrix",
    "flatten",
    "global_avg_pool",
    "identity",
    "linear_head",
    "relu",
    "softmax_cross_entropy",
    "sub",
    "unflatten",
    "zeros",
]

"""
Application sites of convolutions.

A convolution weight may be shared by several sites. Each site owns its own
batch normalization (when enabled) and applies the model's activation, so
``ConvUnit`` is the smallest building block of every architecture here.
"""

from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from app.core.errors import ConfigurationError
from app.engine.operators import BatchNormState, ConvOperator, Padding
from app.engine.ops import batch_norm, conv2d, identity, relu
from app.engine.tensor import Parameter, ParameterRegistry, Tensor

ACTIVATIONS: Dict[str, Callable[[Tensor], Tensor]] = {"relu": relu, "identity": identity}


class ConvUnit:
    """conv -> batch norm (optional) -> activation."""

    def __init__(self, op: ConvOperator, bn: Optional[BatchNormState], activation: str = "relu"):
        if activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation '{activation}'")
        if bn is not None and bn.channels != op.out_channels:
            raise ConfigurationError(
                f"batch norm '{bn.name}' has {bn.channels} channels, "
                f"{op.shared_id} produces {op.out_channels}"
            )
        self.op = op
        self.bn = bn
        self.activation = activation

    def __call__(self, x: Tensor, mode: str = "train") -> Tensor:
        y = conv2d(x, self.op)
        if self.bn is not None:
            y = batch_norm(y, self.bn, mode)
        return ACTIVATIONS[self.activation](y)

    def __repr__(self) -> str:
        bn = self.bn.name if self.bn is not None else None
        return f"ConvUnit({self.op.shared_id}, bn={bn}, activation={self.activation})"


class LayerFactory:
    """Creates operators, normalizations and units for one model.

    All weights are drawn from one generator in construction order, so a
    model is a pure function of its config and seed.
    """

    def __init__(
        self,
        registry: ParameterRegistry,
        rng: Optional[np.random.Generator],
        dtype=np.float32,
        activation: str = "relu",
        batch_norm: bool = True,
    ):
        self.registry = registry
        self.rng = rng
        self.dtype = np.dtype(dtype)
        self.activation = activation
        self.batch_norm = batch_norm

    def conv(
        self,
        shared_id: str,
        in_channels: int,
        out_channels: int,
        stencil: Union[int, Tuple[int, int]] = 3,
        groups: int = 1,
        stride: int = 1,
        padding: Optional[Padding] = None,
        role: str = "conv",
    ) -> ConvOperator:
        return ConvOperator.create(
            shared_id,
            in_channels,
            out_channels,
            stencil=stencil,
            groups=groups,
            stride=stride,
            padding=padding,
            role=role,
            dtype=self.dtype,
            rng=self.rng,
            registry=self.registry,
        )

    def norm(self, name: str, channels: int) -> Optional[BatchNormState]:
        if not self.batch_norm:
            return None
        return BatchNormState(name, channels, dtype=self.dtype, registry=self.registry)

    def unit(self, op: ConvOperator, bn_name: str, activation: Optional[str] = None) -> ConvUnit:
        return ConvUnit(op, self.norm(bn_name, op.out_channels), activation or self.activation)

    def dense(self, shared_id: str, in_features: int, out_features: int) -> Tuple[Parameter, Parameter]:
        """Head weights ``U(-1/sqrt(c), 1/sqrt(c))`` and a zero bias."""
        bound = 1.0 / np.sqrt(in_features)
        if self.rng is None:
            data = np.zeros((in_features, out_features))
        else:
            data = self.rng.uniform(-bound, bound, size=(in_features, out_features))
        weights = Parameter(data.astype(self.dtype), f"{shared_id}.weight", "head")
        bias = Parameter(np.zeros(out_features, dtype=self.dtype), f"{shared_id}.bias", "head")
        self.registry.register(weights)
        self.registry.register(bias)
        return weights, bias

"""
Convolution operators and batch-normalization state.

A ``ConvOperator`` owns (or shares) one weight tensor of shape
``(out_channels, in_channels / groups, s, s')``. The group structure follows
the usual convention: output channels ``[k*out/g, (k+1)*out/g)`` read only
input channels ``[k*in/g, (k+1)*in/g)``.
"""

from typing import Optional, Tuple, Union

import numpy as np

from app.core.errors import ConfigurationError
from app.engine.tensor import Parameter, ParameterRegistry

Padding = Union[int, Tuple[int, int]]


def _pair(value: Union[int, Tuple[int, int]]) -> Tuple[int, int]:
    if isinstance(value, (tuple, list)):
        if len(value) != 2:
            raise ConfigurationError(f"expected a pair, got {value}")
        return int(value[0]), int(value[1])
    return int(value), int(value)


class ConvOperator:
    """A possibly grouped, possibly strided convolution without bias."""

    def __init__(
        self,
        weights: Parameter,
        in_channels: int,
        out_channels: int,
        stencil: Union[int, Tuple[int, int]] = 3,
        groups: int = 1,
        stride: int = 1,
        padding: Optional[Padding] = None,
    ):
        s, t = _pair(stencil)
        if min(s, t, in_channels, out_channels, groups, stride) < 1:
            raise ConfigurationError(
                f"conv extents must be positive: stencil={s}x{t}, in={in_channels}, "
                f"out={out_channels}, groups={groups}, stride={stride}"
            )
        if in_channels % groups or out_channels % groups:
            raise ConfigurationError(
                f"groups={groups} must divide in_channels={in_channels} "
                f"and out_channels={out_channels}"
            )
        pad = (s // 2, t // 2) if padding is None else _pair(padding)
        if min(pad) < 0:
            raise ConfigurationError(f"padding must be nonnegative, got {pad}")
        expected = (out_channels, in_channels // groups, s, t)
        if weights.shape != expected:
            raise ConfigurationError(
                f"weights for '{weights.shared_id}' have shape {weights.shape}, expected {expected}"
            )
        self.weights = weights
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stencil = (s, t)
        self.groups = groups
        self.stride = stride
        self.padding = pad

    @classmethod
    def create(
        cls,
        shared_id: str,
        in_channels: int,
        out_channels: int,
        stencil: Union[int, Tuple[int, int]] = 3,
        groups: int = 1,
        stride: int = 1,
        padding: Optional[Padding] = None,
        role: str = "conv",
        dtype=np.float32,
        rng: Optional[np.random.Generator] = None,
        registry: Optional[ParameterRegistry] = None,
    ) -> "ConvOperator":
        """Allocate fresh weights (fan-out scaled normal, or zeros without rng)."""
        s, t = _pair(stencil)
        if groups < 1 or in_channels % groups or out_channels % groups:
            raise ConfigurationError(
                f"groups={groups} must divide in_channels={in_channels} "
                f"and out_channels={out_channels} for '{shared_id}'"
            )
        shape = (out_channels, in_channels // groups, s, t)
        if rng is None:
            data = np.zeros(shape, dtype=dtype)
        else:
            fan_out = s * t * out_channels / groups
            data = rng.normal(0.0, np.sqrt(2.0 / fan_out), size=shape).astype(dtype)
        weights = Parameter(data, shared_id=shared_id, role=role, dtype=dtype)
        if registry is not None:
            registry.register(weights)
        return cls(weights, in_channels, out_channels, (s, t), groups, stride, padding)

    @property
    def shared_id(self) -> str:
        return self.weights.shared_id

    @property
    def group_size(self) -> int:
        return self.in_channels // self.groups

    @property
    def parameter_count(self) -> int:
        s, t = self.stencil
        return s * t * (self.in_channels // self.groups) * self.out_channels

    @property
    def frozen(self) -> bool:
        return self.weights.frozen

    def freeze(self) -> "ConvOperator":
        self.weights.frozen = True
        return self

    def output_extent(self, m: int, n: int) -> Tuple[int, int]:
        s, t = self.stencil
        ph, pw = self.padding
        return (m + 2 * ph - s) // self.stride + 1, (n + 2 * pw - t) // self.stride + 1

    def __repr__(self) -> str:
        s, t = self.stencil
        return (
            f"ConvOperator({self.shared_id}, {self.in_channels}->{self.out_channels}, "
            f"{s}x{t}, groups={self.groups}, stride={self.stride}, padding={self.padding})"
        )


class BatchNormState:
    """Per-channel affine normalization with running statistics."""

    def __init__(
        self,
        name: str,
        channels: int,
        eps: float = 1e-5,
        momentum: float = 0.1,
        dtype=np.float32,
        registry: Optional[ParameterRegistry] = None,
    ):
        if channels < 1:
            raise ConfigurationError(f"batch norm '{name}' needs at least one channel")
        if not 0.0 < momentum < 1.0:
            raise ConfigurationError(f"batch norm momentum must lie in (0,1), got {momentum}")
        if eps <= 0.0:
            raise ConfigurationError(f"batch norm epsilon must be positive, got {eps}")
        self.name = name
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Parameter(np.ones(channels, dtype=dtype), f"{name}.gamma", "BN", decay=False)
        self.beta = Parameter(np.zeros(channels, dtype=dtype), f"{name}.beta", "BN", decay=False)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        if registry is not None:
            registry.register(self.gamma)
            registry.register(self.beta)
            registry.register_buffer(f"{name}.running_mean", self.running_mean)
            registry.register_buffer(f"{name}.running_var", self.running_var)

    @property
    def parameter_count(self) -> int:
        return 2 * self.channels

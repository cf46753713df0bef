"""
Complete classifiers: ResNet, MgNet and MGiaD.

All three share the stem (3x3 convolution, BN, activation) and the head
(global average pooling, affine map). They differ in the body between:

- ``ResNet``: basic residual blocks with unshared convolutions, a stride-2
  first convolution and a 1x1 projection shortcut at every level change.
- ``MgNet``: the smoothing iteration on each level with the configured
  weight sharing, resolution coarsening between levels.
- ``MGiaD``: one SiC cycle on each level, FAS resolution coarsening between
  levels.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional

import structlog

from app.blocks.hierarchy import ChannelHierarchy, sic_cycle
from app.blocks.smoothing import ResolutionTransfer, SmoothingBlock, resolution_step, smooth
from app.blocks.units import ACTIVATIONS, LayerFactory
from app.engine.operators import ConvOperator
from app.engine.ops import add, batch_norm, conv2d, global_avg_pool, linear_head, zeros
from app.engine.tensor import Parameter, ParameterRegistry, Tensor
from app.models.schemas import ModelConfig


@dataclass
class ModelPlan:
    """Validated, scaled channel plan of a model."""

    widths: List[int]
    ladders: List[List[int]] = field(default_factory=list)
    g_s: Optional[int] = None
    c_K: Optional[int] = None


class Stem:
    """Input image to the first level's data ``f_1``."""

    def __init__(self, factory: LayerFactory, in_channels: int, width: int):
        op = factory.conv("stem.conv", in_channels, width, role="stem")
        self.unit = factory.unit(op, "stem.bn")

    def __call__(self, x: Tensor, mode: str = "train") -> Tensor:
        return self.unit(x, mode)


class Head:
    """Global average pooling followed by an affine classifier."""

    def __init__(self, factory: LayerFactory, channels: int, num_classes: int):
        self.weights, self.bias = factory.dense("head", channels, num_classes)

    def __call__(self, u: Tensor) -> Tensor:
        return linear_head(global_avg_pool(u), self.weights, self.bias)


class Network(ABC):
    """Base class for all classifiers."""

    def __init__(self, config: ModelConfig, plan: ModelPlan, factory: LayerFactory):
        self.config = config
        self.plan = plan
        self.registry: ParameterRegistry = factory.registry
        self.dtype = factory.dtype
        self.logger = structlog.get_logger(f"mgiad.blocks.{config.variant.value}")
        self.stem = Stem(factory, config.input_channels, plan.widths[0])
        self._build(factory)
        self.head = Head(factory, plan.widths[-1], config.num_classes)

    @abstractmethod
    def _build(self, factory: LayerFactory) -> None:
        """Create the body operators."""

    @abstractmethod
    def features(self, f: Tensor, mode: str = "train") -> Tensor:
        """Map the stem output to the last level's features."""

    def forward(self, images, mode: str = "train") -> Tensor:
        x = images if isinstance(images, Tensor) else Tensor(images, dtype=self.dtype)
        return self.head(self.features(self.stem(x, mode), mode))

    __call__ = forward

    @property
    def parameters(self) -> List[Parameter]:
        return list(self.registry)

    def parameter_count(self) -> int:
        return self.registry.size()

    def freeze(self) -> "Network":
        for param in self.registry:
            param.frozen = True
        return self


class BasicBlock:
    """Two 3x3 convolutions with an identity or projection shortcut."""

    def __init__(self, factory: LayerFactory, scope: str, in_channels: int, channels: int, stride: int):
        conv1 = factory.conv(f"{scope}.conv1", in_channels, channels, stride=stride, role="A")
        self.first = factory.unit(conv1, f"{scope}.bn1")
        self.conv2 = factory.conv(f"{scope}.conv2", channels, channels, role="B")
        self.bn2 = factory.norm(f"{scope}.bn2", channels)
        self.shortcut: Optional[ConvOperator] = None
        self.shortcut_bn = None
        if stride != 1 or in_channels != channels:
            self.shortcut = factory.conv(
                f"{scope}.shortcut", in_channels, channels, stencil=1, stride=stride, padding=0,
                role="shortcut",
            )
            self.shortcut_bn = factory.norm(f"{scope}.shortcut.bn", channels)
        self.activation = ACTIVATIONS[factory.activation]

    def __call__(self, x: Tensor, mode: str = "train") -> Tensor:
        y = conv2d(self.first(x, mode), self.conv2)
        if self.bn2 is not None:
            y = batch_norm(y, self.bn2, mode)
        skip = x
        if self.shortcut is not None:
            skip = conv2d(x, self.shortcut)
            if self.shortcut_bn is not None:
                skip = batch_norm(skip, self.shortcut_bn, mode)
        return self.activation(add(y, skip))


class ResNet(Network):
    """Classical ResNet with ``nu`` basic blocks per level."""

    def _build(self, factory: LayerFactory) -> None:
        self.blocks: List[BasicBlock] = []
        in_channels = self.plan.widths[0]
        for level, width in enumerate(self.plan.widths, start=1):
            for index in range(1, self.config.nu + 1):
                stride = 2 if level > 1 and index == 1 else 1
                self.blocks.append(
                    BasicBlock(factory, f"level{level}.block{index}", in_channels, width, stride)
                )
                in_channels = width

    def features(self, f: Tensor, mode: str = "train") -> Tensor:
        for block in self.blocks:
            f = block(f, mode)
        return f


class MgNet(Network):
    """Smoothing iteration per level with resolution coarsening in between."""

    def _build(self, factory: LayerFactory) -> None:
        g_s = self.plan.g_s
        self.smoothers: List[SmoothingBlock] = []
        self.transfers: List[ResolutionTransfer] = []
        widths = self.plan.widths
        for level, width in enumerate(widths, start=1):
            groups = width // g_s if g_s else 1
            block = SmoothingBlock.create(
                factory, f"level{level}", width, self.config.nu, self.config.sharing, groups=groups,
                zero_start=level == 1 or not self.config.fas,
            )
            self.smoothers.append(block)
            if level < len(widths):
                self.transfers.append(
                    ResolutionTransfer.create(
                        factory, f"transfer{level}", block.A, width, widths[level], self.config.fas
                    )
                )

    def features(self, f: Tensor, mode: str = "train") -> Tensor:
        u = zeros(f.shape, dtype=f.dtype)
        au = None
        for level, block in enumerate(self.smoothers):
            u = smooth(u, f, block, mode, au=au)
            if level < len(self.transfers):
                next_unit = self.smoothers[level + 1].first_unit
                u, f, au = resolution_step(u, f, self.transfers[level], next_unit, mode)
        return u


class MGiaD(Network):
    """SiC on every resolution level, FAS resolution coarsening in between."""

    def _build(self, factory: LayerFactory) -> None:
        config = self.config
        self.hierarchies: List[ChannelHierarchy] = []
        self.transfers: List[ResolutionTransfer] = []
        widths = self.plan.widths
        for level, width in enumerate(widths, start=1):
            hierarchy = ChannelHierarchy.create(
                factory,
                f"level{level}",
                width,
                self.plan.g_s,
                self.plan.c_K,
                config.eta_pre,
                config.eta_post,
                config.ladder,
                zero_start=level == 1 or not config.fas,
            )
            self.hierarchies.append(hierarchy)
            if level < len(widths):
                self.transfers.append(
                    ResolutionTransfer.create(
                        factory, f"transfer{level}", hierarchy.levels[0].A_hat, width,
                        widths[level], config.fas,
                    )
                )

    def features(self, f: Tensor, mode: str = "train") -> Tensor:
        u = zeros(f.shape, dtype=f.dtype)
        au = None
        for level, hierarchy in enumerate(self.hierarchies):
            u = sic_cycle(f, u, hierarchy, mode=mode, au=au)
            if level < len(self.transfers):
                next_unit = self.hierarchies[level + 1].first_unit
                u, f, au = resolution_step(u, f, self.transfers[level], next_unit, mode)
        return u


def mgiad_forward(f1: Tensor, model: MGiaD, mode: str = "train") -> Tensor:
    """Class scores from the stem output ``f_1``."""
    return model.head(model.features(f1, mode))


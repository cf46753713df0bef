"""
Architectural units built from the tensor engine: smoothing iteration,
resolution coarsening, the in-channel V-cycle and complete networks.
"""

from .builder import build_model, resolve_plan
from .hierarchy import ChannelHierarchy, ChannelLevel, channel_ladder, sic_cycle
from .networks import MGiaD, MgNet, ModelPlan, Network, ResNet, mgiad_forward
from .smoothing import CoarseState, ResolutionTransfer, SmoothingBlock, resolution_step, smooth
from .units import ConvUnit, LayerFactory

__all__ = [
    "ChannelHierarchy",
    "ChannelLevel",
    "CoarseState",
    "ConvUnit",
    "LayerFactory",
    "MGiaD",
    "MgNet",
    "ModelPlan",
    "Network",
    "ResNet",
    "ResolutionTransfer",
    "SmoothingBlock",
    "build_model",
    "channel_ladder",
    "mgiad_forward",
    "resolution_step",
    "resolve_plan",
    "sic_cycle",
    "smooth",
]

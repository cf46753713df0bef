"""
Optimization: SGD, learning-rate schedules, the training loop and checkpoints.
"""

from .checkpoint import Checkpoint, load_checkpoint, restore_checkpoint, save_checkpoint
from .optimizer import OptimizerState, sgd_step
from .schedule import Schedule, schedule_lr
from .trainer import EpochRecord, Evaluation, RunLog, evaluate, train

__all__ = [
    "Checkpoint",
    "EpochRecord",
    "Evaluation",
    "OptimizerState",
    "RunLog",
    "Schedule",
    "evaluate",
    "load_checkpoint",
    "restore_checkpoint",
    "save_checkpoint",
    "schedule_lr",
    "sgd_step",
    "train",
]

"""
Learning-rate schedules.
"""

import math

from pydantic import BaseModel, Field

from app.models.schemas import ScheduleKind, TrainConfig


class Schedule(BaseModel):
    """Cosine annealing over ``epochs`` or a step decay every ``period`` epochs."""

    kind: ScheduleKind = ScheduleKind.COSINE
    base_lr: float = Field(default=0.05, ge=0.0)
    epochs: int = Field(default=400, ge=1)
    factor: float = Field(default=0.1, gt=0.0)
    period: int = Field(default=25, ge=1)

    @classmethod
    def from_config(cls, config: TrainConfig) -> "Schedule":
        return cls(
            kind=config.schedule,
            base_lr=config.lr,
            epochs=config.epochs,
            factor=config.step_factor,
            period=config.step_period,
        )


def schedule_lr(schedule: Schedule, epoch: int) -> float:
    """Learning rate for 0-based ``epoch``; clamped to ``[0, epochs]``."""
    t = min(max(epoch, 0), schedule.epochs)
    if schedule.kind is ScheduleKind.COSINE:
        return schedule.base_lr * (1.0 + math.cos(math.pi * t / schedule.epochs)) / 2.0
    return schedule.base_lr * schedule.factor ** (t // schedule.period)

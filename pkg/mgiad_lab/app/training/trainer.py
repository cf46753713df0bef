"""
Training loop and evaluation.

One epoch runs every batch of the training split in train mode (batch
statistics in BN, running statistics updated), records the running mean
loss and accuracy, then evaluates the test split in eval mode. The log is
a pure function of the model's initial weights, the data and the seed.
"""

from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel

from app.blocks.networks import Network
from app.core.errors import TrainingDivergedError
from app.data.batching import batches
from app.data.dataset import Dataset
from app.engine.ops import accuracy, softmax_cross_entropy
from app.engine.tape import Tape, backward
from app.models.schemas import TrainConfig
from app.training.checkpoint import save_checkpoint
from app.training.optimizer import OptimizerState, sgd_step
from app.training.schedule import Schedule, schedule_lr

logger = structlog.get_logger("mgiad.training.trainer")

LOG_COLUMNS = ["epoch", "lr", "train_loss", "train_acc", "test_acc"]
EVAL_BATCH = 256


class EpochRecord(BaseModel):
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    test_acc: float


class Evaluation(BaseModel):
    """Top-1 accuracy and mean cross-entropy of one split."""

    accuracy: float
    loss: float
    samples: int


class RunLog(BaseModel):
    """Per-epoch records of one training run."""

    seed: int
    records: List[EpochRecord] = []

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.records], columns=LOG_COLUMNS)

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        text = self.to_frame().to_csv(index=False)
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        return text

    @property
    def losses(self) -> List[float]:
        return [r.train_loss for r in self.records]


def evaluate(model: Network, dataset: Dataset, batch_size: int = EVAL_BATCH) -> Evaluation:
    """Eval-mode accuracy and mean loss; parameters and BN statistics are untouched."""
    correct = 0
    loss_sum = 0.0
    for batch in batches(dataset, batch_size, shuffle=False):
        logits = model(batch.images, mode="eval")
        loss_sum += float(softmax_cross_entropy(logits, batch.labels).item()) * len(batch.labels)
        correct += accuracy(logits, batch.labels)[0]
    n = len(dataset)
    if n == 0:
        return Evaluation(accuracy=0.0, loss=0.0, samples=0)
    return Evaluation(accuracy=correct / n, loss=loss_sum / n, samples=n)


def _diverged(losses: List[float], factor: float, patience: int) -> bool:
    if len(losses) <= patience:
        return False
    return all(loss > factor * losses[0] for loss in losses[-patience:])


def train(
    model: Network,
    train_set: Dataset,
    test_set: Dataset,
    config: TrainConfig,
    seed: int = 0,
    augment: bool = False,
    output_dir: Optional[Union[str, Path]] = None,
) -> RunLog:
    """Run ``config.epochs`` epochs of SGD; writes ``log.csv`` and checkpoints into ``output_dir``."""
    schedule = Schedule.from_config(config)
    state = OptimizerState(lr=config.lr, momentum=config.momentum, weight_decay=config.weight_decay)
    log = RunLog(seed=seed)
    out = Path(output_dir) if output_dir is not None else None

    for epoch in range(config.epochs):
        state.lr = schedule_lr(schedule, epoch)
        loss_sum, correct = 0.0, 0
        for batch in batches(train_set, config.batch_size, seed=seed, epoch=epoch, augment=augment):
            with Tape(model.registry) as tape:
                logits = model(batch.images, mode="train")
                loss = softmax_cross_entropy(logits, batch.labels)
            grads = backward(tape, loss)
            sgd_step(model.registry, grads, state)
            loss_sum += float(loss.item()) * len(batch.labels)
            correct += accuracy(logits, batch.labels)[0]

        n = max(len(train_set), 1)
        record = EpochRecord(
            epoch=epoch + 1,
            lr=state.lr,
            train_loss=loss_sum / n,
            train_acc=correct / n,
            test_acc=evaluate(model, test_set).accuracy,
        )
        log.records.append(record)
        logger.info("epoch finished", **record.model_dump())

        if out is not None:
            log.to_csv(out / "log.csv")
            if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(out / f"epoch{epoch + 1:04d}.mgck", model, state, epoch + 1)

        if _diverged(log.losses, config.divergence_factor, config.divergence_patience):
            raise TrainingDivergedError(
                f"training loss above {config.divergence_factor}x the first epoch's "
                f"for {config.divergence_patience} epochs",
                log.losses,
            )
        if not np.isfinite(record.train_loss):
            raise TrainingDivergedError("training loss is not finite", log.losses)

    if out is not None:
        save_checkpoint(out / "final.mgck", model, state, config.epochs)
    return log

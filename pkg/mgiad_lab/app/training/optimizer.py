"""
SGD with momentum and coupled weight decay.

``v <- mu v + (g + wd p)`` and ``p <- p - lr v``. Parameters created with
``decay=False`` (batch-norm gamma and beta) get no decay term; frozen
parameters are never touched.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np
import structlog

from app.core.errors import ConfigurationError, NonFiniteGradientError
from app.engine.tensor import Parameter

logger = structlog.get_logger("mgiad.training.optimizer")


@dataclass
class OptimizerState:
    """Momentum buffers and hyperparameters of one run."""

    lr: float
    momentum: float = 0.9
    weight_decay: float = 1e-4
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigurationError(f"learning rate must be nonnegative, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must lie in [0, 1), got {self.momentum}")


def check_finite(name: str, grad: np.ndarray) -> None:
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(name, int(np.isnan(grad).sum()), int(np.isinf(grad).sum()))


def sgd_step(params: Iterable[Parameter], grads: Dict[str, np.ndarray], state: OptimizerState) -> None:
    """Update ``params`` in place from ``grads`` (keyed by shared id)."""
    # Every gradient is checked before any weight changes.
    updates = []
    for param in params:
        if param.frozen or param.shared_id not in grads:
            continue
        grad = np.asarray(grads[param.shared_id])
        if grad.shape != param.shape:
            raise ConfigurationError(
                f"gradient for '{param.shared_id}' has shape {grad.shape}, parameter {param.shape}"
            )
        check_finite(param.shared_id, grad)
        updates.append((param, grad))

    for param, grad in updates:
        direction = grad + state.weight_decay * param.data if param.decay else grad
        velocity = state.buffers.get(param.shared_id)
        if velocity is None:
            velocity = np.zeros_like(param.data)
        velocity = state.momentum * velocity + direction
        state.buffers[param.shared_id] = velocity.astype(param.dtype, copy=False)
        param.data -= (state.lr * velocity).astype(param.dtype, copy=False)
    state.step += 1

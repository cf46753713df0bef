"""
Reverse-mode automatic differentiation.

Operations executed inside ``with Tape(registry) as tape:`` are recorded in
order together with a closure that maps the output gradient to input
gradients. ``backward`` replays the record once, in reverse.
"""

from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.core.errors import UsageError
from app.engine.tensor import Parameter, ParameterRegistry, Tensor

logger = structlog.get_logger("mgiad.engine.tape")

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("mgiad_active_tape", default=None)


@dataclass
class Node:
    """One recorded primitive."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of primitives and the parameters they may touch."""

    def __init__(self, registry: Optional[ParameterRegistry] = None):
        self.registry = registry
        self.nodes: List[Node] = []
        self.visits = 0
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def __len__(self) -> int:
        return len(self.nodes)


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def record(op: str, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> Tensor:
    """Attach ``output`` to the active tape if any input needs a gradient."""
    tape = _ACTIVE_TAPE.get()
    if tape is None:
        return output
    if any(t.requires_grad and not _is_frozen(t) for t in inputs):
        output.requires_grad = True
        tape.record(Node(op=op, inputs=tuple(inputs), output=output, backward=backward))
    return output


def _is_frozen(t: Tensor) -> bool:
    return isinstance(t, Parameter) and t.frozen


def backward(tape: Optional[Tape], loss: Tensor) -> Dict[str, np.ndarray]:
    """Gradients of the scalar ``loss`` for every parameter the tape knows.

    Parameters listed in the tape's registry but never used get zeros.
    Without a registry, every parameter that appears in the record is
    returned.
    """
    if tape is None or not tape.nodes:
        raise UsageError("backward called without a recorded forward tape")
    if loss.size != 1:
        raise UsageError(f"loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad or not any(node.output is loss for node in tape.nodes):
        raise UsageError("loss was not produced by this tape")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    seen: Dict[int, Tensor] = {}

    for node in reversed(tape.nodes):
        tape.visits += 1
        grad_out = grads.pop(id(node.output), None)
        if grad_out is None:
            continue
        input_grads = node.backward(grad_out)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad or _is_frozen(tensor):
                continue
            key = id(tensor)
            if isinstance(tensor, Parameter):
                seen[key] = tensor
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad

    if tape.registry is not None:
        params = list(tape.registry)
    else:
        params = list(seen.values())

    result: Dict[str, np.ndarray] = {}
    for param in params:
        grad = grads.get(id(param))
        result[param.shared_id] = (
            np.zeros_like(param.data) if grad is None else grad.astype(param.dtype, copy=False)
        )
    logger.debug("backward finished", nodes=len(tape.nodes), parameters=len(result))
    return result

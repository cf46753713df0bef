"""
Dense tensors, learnable parameters and the parameter registry.

Feature maps are channel-last: ``(batch, height, width, channels)``.
Parameters carry a ``shared_id``; every use site of one id refers to the
same object, so gradients from all sites land in one buffer.
"""

from collections import OrderedDict
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from app.core.errors import ConfigurationError


class Precision(str, Enum):
    """Numeric precision of a run."""

    TRAINING = "training"
    VERIFICATION = "verification"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self is Precision.TRAINING else np.float64)


class Tensor:
    """A dense real array that may take part in a recorded computation."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ):
        array = np.asarray(data, dtype=dtype)
        if array.dtype.kind != "f":
            array = array.astype(np.float64)
        if any(extent < 1 for extent in array.shape):
            raise ConfigurationError(f"tensor extents must be >= 1, got shape {array.shape}")
        self.data = array
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __add__(self, other: "Tensor") -> "Tensor":
        from app.engine.ops import add

        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from app.engine.ops import sub

        return sub(self, other)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


class Parameter(Tensor):
    """A learnable tensor registered under a shared id."""

    __slots__ = ("shared_id", "role", "decay", "frozen")

    def __init__(
        self,
        data,
        shared_id: str,
        role: str,
        decay: bool = True,
        frozen: bool = False,
        dtype: Optional[np.dtype] = None,
    ):
        super().__init__(data, requires_grad=True, name=shared_id, dtype=dtype)
        self.shared_id = shared_id
        self.role = role
        self.decay = decay
        self.frozen = frozen

    def __repr__(self) -> str:
        return f"Parameter({self.shared_id}, role={self.role}, shape={self.shape})"


class ParameterRegistry:
    """Ordered map ``shared_id -> Parameter`` plus non-learnable buffers."""

    def __init__(self):
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()
        self._buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def register(self, param: Parameter) -> Parameter:
        existing = self._params.get(param.shared_id)
        if existing is not None and existing is not param:
            raise ConfigurationError(f"duplicate parameter id '{param.shared_id}'")
        self._params[param.shared_id] = param
        return param

    def register_buffer(self, name: str, array: np.ndarray) -> np.ndarray:
        if name in self._buffers and self._buffers[name] is not array:
            raise ConfigurationError(f"duplicate buffer id '{name}'")
        self._buffers[name] = array
        return array

    def __contains__(self, shared_id: str) -> bool:
        return shared_id in self._params

    def __getitem__(self, shared_id: str) -> Parameter:
        return self._params[shared_id]

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> List[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def buffers(self) -> Dict[str, np.ndarray]:
        return dict(self._buffers)

    def size(self) -> int:
        """Total number of learnable scalars, each shared id counted once."""
        return int(sum(p.size for p in self._params.values()))

    def shapes(self) -> List[Tuple[int, ...]]:
        return [p.shape for p in self._params.values()]

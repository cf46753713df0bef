"""
Binary checkpoints.

Format ``MGCK`` version 1, little-endian::

    magic    4 bytes   b"MGCK"
    version  uint32    1
    epoch    uint32
    step     uint64    optimizer steps taken
    count    uint32    number of entries

    then ``count`` entries:
    kind     uint8     0 parameter, 1 buffer (BN running statistic), 2 momentum
    dtype    uint8     0 float32, 1 float64
    ndim     uint8
    name_len uint16
    name     name_len bytes, UTF-8
    shape    ndim x uint32
    data     prod(shape) values, C order

A plain-text manifest (``<file>.manifest.txt``) lists every entry as
``kind name dtype shape``.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import structlog

from app.blocks.networks import Network
from app.core.errors import CheckpointError, CheckpointMismatchError
from app.training.optimizer import OptimizerState

logger = structlog.get_logger("mgiad.training.checkpoint")

MAGIC = b"MGCK"
VERSION = 1
HEADER = struct.Struct("<4sIIQI")
ENTRY = struct.Struct("<BBBH")
KINDS = ("parameter", "buffer", "momentum")
DTYPES = (np.dtype("<f4"), np.dtype("<f8"))

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    """Arrays of one checkpoint, grouped by kind."""

    epoch: int = 0
    step: int = 0
    parameters: Dict[str, np.ndarray] = field(default_factory=dict)
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    momentum: Dict[str, np.ndarray] = field(default_factory=dict)

    def groups(self):
        return (self.parameters, self.buffers, self.momentum)


def manifest_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.txt")


def save_checkpoint(
    path: PathLike, model: Network, state: Optional[OptimizerState] = None, epoch: int = 0
) -> Path:
    """Write parameters, BN statistics and momentum buffers of ``model``."""
    checkpoint = Checkpoint(
        epoch=epoch,
        step=state.step if state is not None else 0,
        parameters={name: param.data for name, param in model.registry.items()},
        buffers=model.registry.buffers(),
        momentum=dict(state.buffers) if state is not None else {},
    )
    chunks = []
    lines = []
    count = 0
    for kind, group in enumerate(checkpoint.groups()):
        for name, array in group.items():
            array = np.asarray(array)
            dtype = DTYPES[1] if array.dtype == np.float64 else DTYPES[0]
            encoded = name.encode("utf-8")
            chunks.append(ENTRY.pack(kind, DTYPES.index(dtype), array.ndim, len(encoded)))
            chunks.append(encoded)
            chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
            chunks.append(np.ascontiguousarray(array, dtype=dtype).tobytes())
            lines.append(f"{KINDS[kind]} {name} {dtype.name} {'x'.join(map(str, array.shape)) or 'scalar'}")
            count += 1

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(HEADER.pack(MAGIC, VERSION, epoch, checkpoint.step, count) + b"".join(chunks))
    manifest_path(path).write_text(
        f"MGCK v{VERSION} epoch={epoch} step={checkpoint.step} entries={count}\n" + "\n".join(lines) + "\n"
    )
    logger.info("checkpoint saved", path=str(path), epoch=epoch, entries=count)
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise CheckpointError(f"{path}: file too short for a checkpoint header")
    magic, version, epoch, step, count = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")

    checkpoint = Checkpoint(epoch=epoch, step=step)
    offset = HEADER.size
    try:
        for _ in range(count):
            kind, dtype_code, ndim, name_len = ENTRY.unpack_from(raw, offset)
            offset += ENTRY.size
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            dtype = DTYPES[dtype_code]
            size = int(np.prod(shape, dtype=np.int64))
            array = np.frombuffer(raw, dtype=dtype, count=size, offset=offset).reshape(shape).copy()
            offset += size * dtype.itemsize
            checkpoint.groups()[kind][name] = array
    except (struct.error, ValueError, IndexError) as exc:
        raise CheckpointError(f"{path}: corrupt entry at byte {offset}: {exc}") from exc
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return checkpoint


def _check_group(kind: str, expected: Dict[str, tuple], stored: Dict[str, np.ndarray]) -> None:
    for name, shape in expected.items():
        if name not in stored:
            raise CheckpointMismatchError(f"{kind} '{name}' missing from checkpoint")
        if stored[name].shape != shape:
            raise CheckpointMismatchError(
                f"{kind} '{name}': checkpoint shape {stored[name].shape}, model shape {shape}"
            )
    extra = [name for name in stored if name not in expected]
    if extra:
        raise CheckpointMismatchError(f"{kind} '{extra[0]}' in checkpoint is not part of the model")


def restore_checkpoint(
    model: Network, checkpoint: Checkpoint, state: Optional[OptimizerState] = None
) -> Network:
    """Copy ``checkpoint`` into ``model`` (and ``state``); shapes must match exactly."""
    params = dict(model.registry.items())
    buffers = model.registry.buffers()
    _check_group("parameter", {n: p.shape for n, p in params.items()}, checkpoint.parameters)
    _check_group("buffer", {n: b.shape for n, b in buffers.items()}, checkpoint.buffers)
    for name, param in params.items():
        param.data[...] = checkpoint.parameters[name]
    for name, buffer in buffers.items():
        buffer[...] = checkpoint.buffers[name]
    if state is not None:
        state.buffers = {
            name: array.astype(params[name].dtype)
            for name, array in checkpoint.momentum.items()
            if name in params
        }
        state.step = checkpoint.step
    return model

"""
CIFAR-10 / CIFAR-100 binary batches.

A CIFAR-10 record is one label byte followed by 3072 pixel bytes (1024 red,
1024 green, 1024 blue, each 32x32 row by row). CIFAR-100 records carry a
coarse and a fine label byte before the pixels; the fine label is used.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import structlog

from app.core.errors import ConfigurationError, CountMismatchError, TruncatedFileError
from app.data.dataset import Dataset, Stats

logger = structlog.get_logger("mgiad.data.cifar")

SIDE = 32
PIXELS = 3 * SIDE * SIDE
LABEL_BYTES = {10: 1, 100: 2}

PathLike = Union[str, Path]


def record_length(classes: int) -> int:
    if classes not in LABEL_BYTES:
        raise ConfigurationError(f"CIFAR has 10 or 100 classes, got {classes}")
    return LABEL_BYTES[classes] + PIXELS


def _read(path: PathLike, classes: int):
    raw = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
    length = record_length(classes)
    if raw.size % length:
        whole = raw.size // length
        raise TruncatedFileError(
            f"file of {raw.size} bytes is not a whole number of {length}-byte records",
            str(path),
            whole * length,
        )
    records = raw.reshape(-1, length)
    labels = records[:, LABEL_BYTES[classes] - 1].astype(np.int64)
    if len(labels) and labels.max() >= classes:
        index = int(np.argmax(labels >= classes))
        raise CountMismatchError(
            f"label {labels[index]} outside [0, {classes})", str(path), index * length
        )
    images = records[:, LABEL_BYTES[classes]:].reshape(-1, 3, SIDE, SIDE).transpose(0, 2, 3, 1)
    return images, labels


def load_cifar_binary(
    paths: Sequence[PathLike], classes: int = 10, split: str = "train", stats: Optional[Stats] = None
) -> Dataset:
    """Concatenate binary batches into a normalized ``(N, 32, 32, 3)`` dataset."""
    images: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for path in paths:
        batch_images, batch_labels = _read(path, classes)
        images.append(batch_images)
        labels.append(batch_labels)
    if not images:
        raise ConfigurationError("no CIFAR batch files given")
    pixels = np.concatenate(images).astype(np.float64) / 255.0
    dataset = Dataset.from_pixels(pixels, np.concatenate(labels), classes, split, stats)
    logger.info("cifar loaded", files=len(images), count=len(dataset), classes=classes)
    return dataset


def write_cifar_binary(
    path: PathLike,
    images: np.ndarray,
    labels: np.ndarray,
    classes: int = 10,
    coarse_labels: Optional[np.ndarray] = None,
) -> None:
    """Write ``uint8`` images ``(N, 32, 32, 3)`` in the binary record layout."""
    images = np.asarray(images, dtype=np.uint8)
    if images.shape[1:] != (SIDE, SIDE, 3) or len(labels) != len(images):
        raise ConfigurationError(f"expected (N, 32, 32, 3) images and N labels, got {images.shape}")
    columns = [np.asarray(labels, dtype=np.uint8)[:, None]]
    if LABEL_BYTES[classes] == 2:
        coarse = np.zeros(len(labels)) if coarse_labels is None else coarse_labels
        columns.insert(0, np.asarray(coarse, dtype=np.uint8)[:, None])
    columns.append(images.transpose(0, 3, 1, 2).reshape(len(images), PIXELS))
    Path(path).write_bytes(np.hstack(columns).tobytes())


def cifar_files(data_dir: PathLike, classes: int, split: str) -> List[Path]:
    """Standard file names of the binary distributions under ``data_dir``."""
    root = Path(data_dir)
    if classes == 10:
        base = root / "cifar-10-batches-bin"
        names = [f"data_batch_{i}.bin" for i in range(1, 6)] if split == "train" else ["test_batch.bin"]
    else:
        base = root / "cifar-100-binary"
        names = ["train.bin" if split == "train" else "test.bin"]
    files = [base / name for name in names]
    missing = [str(f) for f in files if not f.is_file()]
    if missing:
        raise FileNotFoundError(f"dataset file not found: {missing[0]}")
    return files

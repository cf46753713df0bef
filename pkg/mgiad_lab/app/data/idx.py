"""
IDX files (the FashionMNIST distribution format).

Layout, big-endian::

    offset  type     value
    0       uint32   magic (0x00000803 images, 0x00000801 labels)
    4       uint32   item count N
    8       uint32   rows          (images only)
    12      uint32   columns       (images only)
    ...     uint8    payload, row by row
"""

import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import structlog

from app.core.errors import BadMagicError, ConfigurationError, CountMismatchError, TruncatedFileError
from app.data.dataset import Dataset, Stats

logger = structlog.get_logger("mgiad.data.idx")

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _parse(path: PathLike, magic: int, dims: int) -> Tuple[Tuple[int, ...], np.ndarray]:
    raw = Path(path).read_bytes()
    header = 4 + 4 * dims
    if len(raw) < header:
        raise TruncatedFileError(f"header needs {header} bytes, file has {len(raw)}", str(path), len(raw))
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"wrong magic 0x{found:08x}, expected 0x{magic:08x}", str(path), 0)
    shape = struct.unpack(">" + "I" * dims, raw[4:header])
    payload = int(np.prod(shape, dtype=np.int64))
    if len(raw) < header + payload:
        raise TruncatedFileError(
            f"payload of {payload} bytes declared, {len(raw) - header} present", str(path), len(raw)
        )
    if len(raw) > header + payload:
        raise CountMismatchError(
            f"{len(raw) - header - payload} bytes beyond the declared payload", str(path), header + payload
        )
    if payload == 0:
        return shape, np.zeros(shape, dtype=np.uint8)
    data = np.frombuffer(raw, dtype=np.uint8, count=payload, offset=header).reshape(shape)
    return shape, data


def read_idx_arrays(images_path: PathLike, labels_path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """Raw ``uint8`` images ``(N, rows, cols)`` and labels ``(N,)``."""
    (count, _, _), images = _parse(images_path, IMAGE_MAGIC, 3)
    (label_count,), labels = _parse(labels_path, LABEL_MAGIC, 1)
    if label_count != count:
        raise CountMismatchError(
            f"{label_count} labels for {count} images", str(labels_path), 4
        )
    return images, labels


def write_idx(images_path: PathLike, labels_path: PathLike, images: np.ndarray, labels: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or len(labels) != len(images):
        raise ConfigurationError(f"expected (N, rows, cols) images and N labels, got {images.shape}")
    Path(images_path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes())


def pad_to(images: np.ndarray, size: int) -> np.ndarray:
    """Center ``(N, H, W, C)`` images in a zero ``size x size`` frame."""
    _, h, w, _ = images.shape
    if size < h or size < w:
        raise ConfigurationError(f"cannot pad {h}x{w} images to {size}x{size}")
    top, left = (size - h) // 2, (size - w) // 2
    return np.pad(images, ((0, 0), (top, size - h - top), (left, size - w - left), (0, 0)))


def load_idx(
    images_path: PathLike,
    labels_path: PathLike,
    classes: int = 10,
    split: str = "train",
    pad: Optional[int] = None,
    stats: Optional[Stats] = None,
) -> Dataset:
    """Greyscale IDX pair as a normalized ``(N, H, W, 1)`` dataset."""
    images, labels = read_idx_arrays(images_path, labels_path)
    if len(labels) and labels.max() >= classes:
        index = int(np.argmax(labels >= classes))
        raise CountMismatchError(
            f"label {labels[index]} outside [0, {classes})", str(labels_path), 8 + index
        )
    pixels = images[..., None].astype(np.float64) / 255.0
    if pad is not None:
        pixels = pad_to(pixels, pad)
    logger.info("idx loaded", path=str(images_path), count=len(labels), shape=pixels.shape[1:])
    return Dataset.from_pixels(pixels, labels, classes, split, stats)

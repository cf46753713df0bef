"""
Deterministic mini-batch streams.

The order of an epoch is a pure function of ``(seed, epoch)``: the
permutation comes from the ``shuffle`` sub-stream and augmentation draws
from the ``augment`` sub-stream, both keyed by the epoch.
"""

from typing import Iterator, NamedTuple

import numpy as np

from app.core.errors import ConfigurationError
from app.core.seeding import substream
from app.data.dataset import Dataset

CROP_PADDING = 4


class Batch(NamedTuple):
    images: np.ndarray
    labels: np.ndarray
    indices: np.ndarray


def flip_and_crop(images: np.ndarray, rng: np.random.Generator, padding: int = CROP_PADDING) -> np.ndarray:
    """Random horizontal flip, then a random crop from a zero-padded frame."""
    n, h, w, _ = images.shape
    flips = rng.random(n) < 0.5
    out = np.where(flips[:, None, None, None], images[:, :, ::-1, :], images)
    padded = np.pad(out, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    offsets = rng.integers(0, 2 * padding + 1, size=(n, 2))
    return np.stack([padded[i, y : y + h, x : x + w, :] for i, (y, x) in enumerate(offsets)])


def epoch_order(size: int, seed: int, epoch: int, shuffle: bool = True) -> np.ndarray:
    if not shuffle:
        return np.arange(size)
    return substream(seed, "shuffle", epoch).permutation(size)


def batches(
    dataset: Dataset,
    batch_size: int,
    seed: int = 0,
    epoch: int = 0,
    shuffle: bool = True,
    augment: bool = False,
) -> Iterator[Batch]:
    """Yield the batches of one epoch; the final partial batch is kept."""
    if batch_size < 1:
        raise ConfigurationError(f"batch size must be positive, got {batch_size}")
    order = epoch_order(len(dataset), seed, epoch, shuffle)
    rng = substream(seed, "augment", epoch) if augment else None
    for start in range(0, len(order), batch_size):
        indices = order[start : start + batch_size]
        images = dataset.images[indices]
        if rng is not None:
            images = flip_and_crop(images, rng)
        yield Batch(images, dataset.labels[indices], indices)

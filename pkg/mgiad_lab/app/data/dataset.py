"""
In-memory image classification datasets.

Images are stored channel-last as ``(N, H, W, C)`` float32 arrays, already
normalized per channel. The statistics used are kept on the dataset so a
test split can be normalized with the training split's values.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.errors import ConfigurationError

Stats = Tuple[np.ndarray, np.ndarray]


def channel_stats(images: np.ndarray) -> Stats:
    """Per-channel mean and standard deviation over ``N, H, W``."""
    channels = images.shape[-1]
    if images.shape[0] == 0:
        return np.zeros(channels), np.ones(channels)
    flat = images.reshape(-1, channels).astype(np.float64)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


@dataclass
class Dataset:
    """Normalized images with integer labels."""

    images: np.ndarray
    labels: np.ndarray
    classes: int
    mean: np.ndarray
    std: np.ndarray
    split: str = "train"

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ConfigurationError(f"images must be (N, H, W, C), got shape {self.images.shape}")
        if len(self.labels) != len(self.images):
            raise ConfigurationError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.classes):
            raise ConfigurationError(f"labels must lie in [0, {self.classes})")

    @classmethod
    def from_pixels(
        cls,
        pixels: np.ndarray,
        labels: np.ndarray,
        classes: int,
        split: str = "train",
        stats: Optional[Stats] = None,
    ) -> "Dataset":
        """Normalize ``[0, 1]`` pixels with ``stats`` (or their own statistics)."""
        pixels = np.asarray(pixels, dtype=np.float64)
        mean, std = stats if stats is not None else channel_stats(pixels)
        images = ((pixels - mean) / std).astype(np.float32)
        return cls(images, np.asarray(labels, dtype=np.int64), classes, np.asarray(mean), np.asarray(std), split)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def stats(self) -> Stats:
        return self.mean, self.std

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def pixels(self) -> np.ndarray:
        """Undo the normalization."""
        return self.images.astype(np.float64) * self.std + self.mean

    def subset(self, limit: Optional[int]) -> "Dataset":
        """The first ``limit`` samples; statistics are kept."""
        if limit is None or limit >= len(self):
            return self
        return Dataset(
            self.images[:limit], self.labels[:limit], self.classes, self.mean, self.std, self.split
        )

"""
Gaussian class-centroid images for desk-scale runs.
"""

from typing import Optional

import numpy as np

from app.core.seeding import substream
from app.data.dataset import Dataset, Stats

SPLIT_KEYS = {"train": 1, "test": 2}


def synth_blobs(
    classes: int = 10,
    per_class: int = 32,
    size: int = 32,
    seed: int = 0,
    channels: int = 3,
    noise: float = 1.0,
    split: str = "train",
    stats: Optional[Stats] = None,
) -> Dataset:
    """``per_class`` noisy copies of one random centroid image per class.

    Centroids depend only on ``seed``; the noise draw also depends on the
    split, so train and test share centroids but not samples.
    """
    centroids = substream(seed, "data", 0).standard_normal((classes, size, size, channels))
    rng = substream(seed, "data", SPLIT_KEYS.get(split, 3))
    labels = np.repeat(np.arange(classes), per_class)
    samples = centroids[labels] + noise * rng.standard_normal((len(labels), size, size, channels))
    return Dataset.from_pixels(samples, labels, classes, split, stats)

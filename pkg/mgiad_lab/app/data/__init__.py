"""
Dataset loading and batching: IDX, CIFAR binary and synthetic blobs.
"""

from .batching import Batch, batches
from .cifar import load_cifar_binary, write_cifar_binary
from .dataset import Dataset, channel_stats
from .idx import load_idx, pad_to, read_idx_arrays, write_idx
from .splits import load_splits
from .synthetic import synth_blobs

__all__ = [
    "Batch",
    "Dataset",
    "batches",
    "channel_stats",
    "load_cifar_binary",
    "load_idx",
    "load_splits",
    "pad_to",
    "read_idx_arrays",
    "synth_blobs",
    "write_cifar_binary",
    "write_idx",
]

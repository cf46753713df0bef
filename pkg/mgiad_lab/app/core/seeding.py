"""
Named random sub-streams.

All randomness flows from one integer seed. Each consumer asks for its own
stream by name (``init``, ``shuffle``, ``augment``, ``data``) plus optional
integer keys such as the epoch, so adding a consumer never shifts another.
"""

import zlib

import numpy as np


def stream_key(name: str) -> int:
    """Stable 32-bit key for a stream name."""
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Return a generator for ``(seed, name, *keys)``."""
    sequence = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(stream_key(name),) + tuple(int(k) for k in keys),
    )
    return np.random.default_rng(sequence)

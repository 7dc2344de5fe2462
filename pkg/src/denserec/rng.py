"""Named, reproducible random streams.

Every source of randomness (shuffling, negatives, path masks, dropout,
synthetic data) draws from its own stream so that enabling or disabling one
consumer never shifts the draws seen by another.
"""
from __future__ import annotations

import zlib

import numpy as np

STREAM_NAMES = ("shuffle", "negatives", "path_mask", "dropout", "synth", "init")


def stream_id(name: str) -> int:
    """Stable 32-bit id for a stream name (independent of PYTHONHASHSEED)."""
    return zlib.crc32(name.encode("utf-8"))


class RngStream:
    """A PCG64 generator keyed by ``(seed, stream_id)``."""

    def __init__(self, seed: int, stream: int | str = 0):
        if isinstance(stream, str):
            stream = stream_id(stream)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream) & 0xFFFFFFFFFFFFFFFF
        ss = np.random.SeedSequence([self.seed, self.stream_id])
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, sub: int | str) -> "RngStream":
        """Derive an independent child stream, e.g. one per epoch."""
        if isinstance(sub, str):
            sub = stream_id(sub)
        mixed = (self.stream_id * 0x9E3779B97F4A7C15 + int(sub) + 1) & 0xFFFFFFFFFFFFFFFF
        return RngStream(self.seed, mixed)

    def uniform(self, size, dtype=np.float64) -> np.ndarray:
        return self.generator.random(size, dtype=dtype)

    def bernoulli(self, p: float, size) -> np.ndarray:
        return self.generator.random(size) < p

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self.generator.integers(low, high, size=size)

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self.generator.normal(0.0, scale, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

"""Deterministic, splittable random streams.

Every stochastic routine in the package draws from a :class:`RandomStream`, a
value type identified by ``(seed, stream_id)``. Streams are split by hashing,
not by jumping a shared state, so any unit of work (one outer Monte Carlo
sample, one grid design, one training epoch) owns a stream derived purely from
its identity. Results are therefore independent of evaluation order and of
how work is distributed over threads.

The underlying bit generator is Philox, a counter-based generator keyed by the
128-bit pair ``(seed, stream_id)``: distinct ids give independent sequences by
construction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, also used for weight-file checksums."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _splitmix64(x: int) -> int:
    # Finalizer with full avalanche; keeps derived stream ids well spread.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _key_to_u64(key: int | str | bytes | float | tuple) -> int:
    if isinstance(key, tuple):
        h = _FNV_OFFSET
        for part in key:
            h = ((h ^ _key_to_u64(part)) * _FNV_PRIME) & _MASK64
        return h
    if isinstance(key, str):
        return fnv1a64(key.encode("utf-8"))
    if isinstance(key, bytes):
        return fnv1a64(key)
    if isinstance(key, float):
        return fnv1a64(struct.pack("<d", key))
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    raise TypeError(f"unsupported stream key type: {type(key)!r}")


@dataclass(frozen=True)
class RandomStream:
    """Immutable handle for one reproducible draw sequence."""

    seed: int
    stream_id: int = 0

    def child(self, key: int | str | bytes | float | tuple) -> "RandomStream":
        """Derive an independent stream addressed by ``key``."""
        mixed = _splitmix64(self.stream_id ^ _splitmix64(_key_to_u64(key)))
        return RandomStream(self.seed, mixed)

    def split(self, k: int) -> list["RandomStream"]:
        """Derive ``k`` pairwise independent child streams."""
        return [self.child(("split", i)) for i in range(k)]

    def generator(self) -> np.random.Generator:
        """Fresh generator; repeated calls replay the same sequence."""
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

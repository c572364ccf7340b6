"""Counter-based random number generator with a fixed algorithm.

Every draw is a pure function of (seed, counter), so sequences are
reproducible bit-for-bit across runs and platforms. The mixer is SplitMix64.
"""
from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF
# 53-bit mantissa: uniform doubles get the full float64 resolution
_INV_2_53 = float(2.0**-53)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Deterministic generator: draw i equals mix64(seed + (i+1)*gamma)."""

    def __init__(self, seed: int):
        self._seed = np.uint64(int(seed) & _U64_MASK)
        self._counter = 0

    @property
    def seed(self) -> int:
        return int(self._seed)

    @property
    def counter(self) -> int:
        return self._counter

    def _next_block(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * _GAMMA)

    def uniform(self, size=None, lo: float = 0.0, hi: float = 1.0):
        """Uniform floats in [lo, hi). Scalar when size is None."""
        n = 1 if size is None else int(np.prod(size))
        bits = self._next_block(n) >> np.uint64(11)
        u = bits.astype(np.float64) * _INV_2_53
        out = lo + (hi - lo) * u
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def uniform_signed(self, limit: float, size) -> np.ndarray:
        return self.uniform(size=size, lo=-limit, hi=limit)

    def integer(self, n: int) -> int:
        """One integer in [0, n)."""
        if n <= 0:
            raise ValueError("integer() needs n >= 1")
        return int(self.uniform() * n)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1):
            j = i + self.integer(n - i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def spawn(self, stream: int) -> "Rng":
        """Independent child generator keyed off this seed and a stream id."""
        with np.errstate(over="ignore"):
            child = _mix64(self._seed ^ _mix64(np.uint64(int(stream) & _U64_MASK) + _GAMMA))
        return Rng(int(child))

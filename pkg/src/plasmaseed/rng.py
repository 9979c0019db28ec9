"""Deterministic, platform-stable random number generation.

Every stochastic step in the toolkit (splits, tree thresholds, subsampling,
permutation shuffles, synthetic data) draws from this splitmix-style
generator so that a given seed reproduces bit-identical results on any
platform. Child generators are derived by hashing the parent key together
with string/int tokens, never by sharing mutable state, which is what makes
per-tree and per-fold work order-independent.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps, which is exactly what splitmix needs
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seedable 64-bit generator with counter-based streams.

    The i-th raw value is ``mix(key + (i+1) * GOLDEN)``, so blocks of values
    can be produced vectorized without advancing Python-level state one draw
    at a time.
    """

    def __init__(self, seed: int):
        self.key = seed & _MASK64
        self._counter = 0

    def derive(self, *tokens: str | int) -> "Rng":
        """Child generator keyed by this key plus the given tokens."""
        h = hashlib.blake2b(digest_size=8)
        h.update(self.key.to_bytes(8, "little"))
        for t in tokens:
            h.update(b"/")
            h.update(str(t).encode("utf-8"))
        return Rng(int.from_bytes(h.digest(), "little"))

    def next_u64(self) -> int:
        self._counter += 1
        return _mix((self.key + self._counter * _GOLDEN) & _MASK64)

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniforms(self, count: int) -> np.ndarray:
        """Vector of uniforms in [0, 1), consuming `count` stream positions."""
        start = self._counter + 1
        self._counter += count
        idx = np.arange(start, start + count, dtype=np.uint64)
        raw = _mix_array(np.uint64(self.key) + idx * np.uint64(_GOLDEN))
        return (raw >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def randint(self, n: int) -> int:
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        v = int(self.uniform() * n)
        return n - 1 if v >= n else v

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> np.ndarray:
        idx = list(range(n))
        self.shuffle(idx)
        return np.asarray(idx, dtype=np.intp)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), ascending."""
        if k > n:
            raise ValueError("cannot draw more items than available")
        idx = list(range(n))
        # partial Fisher-Yates: first k slots are the sample
        for i in range(k):
            j = i + self.randint(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return np.asarray(sorted(idx[:k]), dtype=np.intp)

    def normal(self) -> float:
        """Standard normal via Box-Muller."""
        u1 = self.uniform()
        u2 = self.uniform()
        while u1 <= 0.0:
            u1 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, count: int) -> np.ndarray:
        n_pairs = (count + 1) // 2
        u = self.uniforms(2 * n_pairs)
        u1 = np.clip(u[:n_pairs], 2.0 ** -53, None)
        u2 = u[n_pairs:]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:count]

    def exponentials(self, count: int) -> np.ndarray:
        u = np.clip(self.uniforms(count), 2.0 ** -53, None)
        return -np.log(u)

"""Deterministic pseudo-random stream shared by every seeded component.

All reproducible randomness in this package (network initialization,
epoch shuffling, SOM codebooks, scene noise) comes from one counter-based
generator so that identical seeds give bit-identical results on any
platform, and so the stream can be regenerated in any language from the
description below.

Output ``n`` (counting from 1) of a stream with 64-bit seed ``s`` is::

    x = (s + n * 0x9E3779B97F4A7C15) mod 2^64
    x = (x XOR (x >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    x = (x XOR (x >> 27)) * 0x94D049BB133111EB mod 2^64
    x = x XOR (x >> 31)

i.e. the SplitMix64 finalizer (an xorshift-multiply mix) applied to a
Weyl sequence. Derived values:

* ``random()``  -> ``(next_u64() >> 11) * 2^-53`` in [0, 1)
* ``normal()``  -> Box-Muller on two consecutive outputs, with
  ``u1 = ((a >> 11) + 1) * 2^-53`` in (0, 1] and ``u2 = (b >> 11) * 2^-53``:
  ``sqrt(-2 ln u1) * cos(2 pi u2)``
* ``randint(n)`` -> ``next_u64() mod n`` (modulo bias is irrelevant at the
  sizes used here)
* ``shuffle``   -> Fisher-Yates from the top index down, drawing
  ``randint(i + 1)`` for position ``i``

Because outputs depend only on (seed, counter), bulk draws are vectorized
with numpy uint64 arithmetic and agree exactly with the scalar calls.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0**-53


def _mix(x: int) -> int:
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


class SplitMix64:
    """Counter-based SplitMix64 stream (see module docstring)."""

    def __init__(self, seed: int):
        self._seed = int(seed) & _MASK64
        self._count = 0

    def next_u64(self) -> int:
        self._count += 1
        return _mix((self._seed + self._count * _GOLDEN) & _MASK64)

    def u64_array(self, n: int) -> np.ndarray:
        counts = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        x = np.uint64(self._seed) + counts * np.uint64(_GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
        return x ^ (x >> np.uint64(31))

    def random(self) -> float:
        return (self.next_u64() >> 11) * _INV53

    def random_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _INV53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def uniform_array(self, low, high, n: int) -> np.ndarray:
        return np.asarray(low) + (np.asarray(high) - np.asarray(low)) * self.random_array(n)

    def normal(self) -> float:
        a = self.next_u64()
        b = self.next_u64()
        u1 = ((a >> 11) + 1) * _INV53
        u2 = (b >> 11) * _INV53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_array(self, n: int) -> np.ndarray:
        raw = self.u64_array(2 * n) >> np.uint64(11)
        u1 = (raw[0::2].astype(np.float64) + 1.0) * _INV53
        u2 = raw[1::2].astype(np.float64) * _INV53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def randint(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randint bound must be positive")
        return self.next_u64() % n

    def shuffle(self, items) -> None:
        """Fisher-Yates shuffle of a mutable sequence, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> np.ndarray:
        order = list(range(n))
        self.shuffle(order)
        return np.asarray(order, dtype=np.intp)

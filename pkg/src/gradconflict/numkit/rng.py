"""Seeded 64-bit xorshift* generator.

All randomness in the package flows through :class:`Rng` so that datasets,
initialisations and batch orders can be regenerated byte-for-byte from a seed
in any language that implements the same three-line recurrence.
"""

from __future__ import annotations

import math

import numpy as np

ALGORITHM_ID = "xorshift64star+splitmix64seed"

_MASK = 0xFFFFFFFFFFFFFFFF
_MULT = 0x2545F4914F6CDD1D
_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step; returns (new_state, output)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return x, z ^ (z >> 31)


class Rng:
    """xorshift64* stream seeded through splitmix64 (never a zero state)."""

    algorithm_id = ALGORITHM_ID

    def __init__(self, seed: int):
        if seed < 0 or seed > _MASK:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        _, s = splitmix64(seed)
        self.state = s or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK
        x ^= x >> 27
        self.state = x
        return (x * _MULT) & _MASK

    def uniform(self) -> float:
        """Double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (_MASK + 1) - ((_MASK + 1) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def normals(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller; each pair of uniforms yields two values."""
        out = np.empty(n, dtype=np.float64)
        i = 0
        while i < n:
            u1 = 1.0 - self.uniform()  # (0, 1]
            u2 = self.uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(_TWO_PI * u2)
            if i + 1 < n:
                out[i + 1] = r * math.sin(_TWO_PI * u2)
            i += 2
        return out

    def uniforms(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        span = high - low
        return np.array([low + span * self.uniform() for _ in range(n)], dtype=np.float64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=np.int64)

    def spawn(self, tag: int) -> "Rng":
        """Independent child stream, a pure function of (seed, tag)."""
        _, s = splitmix64((self.seed ^ ((tag * 0xD1B54A32D192ED03) & _MASK)) & _MASK)
        return Rng(s)

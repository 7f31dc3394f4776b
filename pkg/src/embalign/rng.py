"""Seedable pseudo-random stream with a fully documented algorithm.

Synthetic benchmark instances must be reproducible bit-for-bit from their
seed alone, including by implementations in other languages, so the
generator cannot be an opaque library default. The algorithm below is
stated completely; reimplementing it from this docstring yields identical
streams.

Algorithm identifier: ``splitmix64-boxmuller-v1``

Integer stream (SplitMix64):
    state is a 64-bit unsigned integer initialized to the seed. Each draw
    advances ``state = (state + 0x9E3779B97F4A7C15) mod 2^64`` and returns
    the mix of the new state::

        z = state
        z = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
        z = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
        output = z XOR (z >> 31)

Uniform doubles:
    ``uniform()`` returns ``(u >> 11) / 2^53`` in [0, 1);
    ``uniform_open()`` returns ``((u >> 11) + 1) / 2^53`` in (0, 1],
    where ``u`` is one integer draw.

Normal deviates (Box-Muller, cosine branch only):
    each deviate consumes exactly two integer draws, in order:
    ``u1 = uniform_open()`` then ``u2 = uniform()``, and returns
    ``sqrt(-2 ln u1) * cos(2 pi u2)``. The sine branch is discarded so the
    stream position never depends on how many deviates a caller buffers.
"""

import math

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

ALGORITHM_ID = "splitmix64-boxmuller-v1"


class SplitMix64:
    """The documented generator; see the module docstring for the spec."""

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self._state = seed

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_uint64() >> 11) / 9007199254740992.0  # 2^53

    def uniform_open(self) -> float:
        """Uniform double in (0, 1]; safe as a log() argument."""
        return ((self.next_uint64() >> 11) + 1) / 9007199254740992.0

    def normal(self) -> float:
        """Standard normal deviate; consumes exactly two integer draws."""
        u1 = self.uniform_open()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_vector(self, n: int) -> list[float]:
        return [self.normal() for _ in range(n)]

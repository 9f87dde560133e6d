"""Deterministic random number generation.

One generator algorithm is used everywhere: PCG32 (O'Neill's
pcg32_srandom/pcg32_random minimal variant). It is tiny, portable, and the
same seed yields the same draw sequence on every platform, which is what
the simulator's reproducibility contract requires.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005
_TWO32 = 4294967296.0


class SeededRng:
    """PCG32 stream plus the derived draws the simulator needs.

    Draw protocol (consumed u32 words per call):
      random / uniform / chance   1
      expovariate                 1
      gauss / lognormal           2  (Box-Muller, cosine branch, no cache)
    """

    __slots__ = ("_state", "_inc", "seed", "seq")

    def __init__(self, seed: int, seq: int = 0):
        self.seed = seed & _MASK64
        self.seq = seq & _MASK64
        self._state = 0
        self._inc = ((self.seq << 1) | 1) & _MASK64
        self._step()
        self._state = (self._state + self.seed) & _MASK64
        self._step()

    def _step(self) -> int:
        old = self._state
        self._state = (old * _MULT + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def next_u32(self) -> int:
        return self._step()

    def random(self) -> float:
        """Uniform in [0, 1)."""
        return self._step() / _TWO32

    def _random_open(self) -> float:
        # (0, 1]; safe as a log() argument
        return (self._step() + 1) / _TWO32

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def chance(self, p: float) -> bool:
        """True with probability p. Always consumes one draw."""
        return self.random() < p

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        u1 = self._random_open()
        u2 = self.random()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z

    def expovariate(self, rate: float) -> float:
        if rate <= 0:
            raise ValueError("rate must be positive")
        return -math.log(self._random_open()) / rate

    def lognormal(self, mu: float, sigma: float) -> float:
        return math.exp(self.gauss(mu, sigma))

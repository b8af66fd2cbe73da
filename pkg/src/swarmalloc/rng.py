"""Counter-based random streams.

Every random decision in a trial is drawn from a stream keyed by *what* is
being decided (round, purpose, agent or vertex), never by the order in which
the engine happens to ask. Two streams with the same key produce the same
numbers regardless of how many other streams were used before them.

The generator is splitmix64 applied to ``key + counter * gamma``. It is not
cryptographic; it is fast to key, which matters because the engine derives a
fresh stream for every agent on every round.
"""

from __future__ import annotations

import math
from typing import Sequence, TypeVar

T = TypeVar("T")

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_TWO_POW_53 = 1.0 / (1 << 53)

# purpose tags for key derivation
AGENT = 1
CLAIM = 2
MESSAGE = 3
PLACEMENT = 4
LEG = 5


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class RngStream:
    """A reproducible stream of random numbers identified by a 64-bit key."""

    __slots__ = ("seed", "key", "_counter")

    def __init__(self, seed: int, key: int | None = None):
        self.seed = seed & _MASK
        self.key = _mix((self.seed + _GAMMA) & _MASK) if key is None else key
        self._counter = 0

    def spawn(self, *labels: int) -> "RngStream":
        """Child stream keyed by this stream's key and ``labels``.

        Spawning does not consume draws from the parent.
        """
        k = self.key
        for lab in labels:
            k = _mix((k ^ (lab & _MASK)) * _GAMMA + 0x632BE59BD9B4E019 & _MASK)
        return RngStream(self.seed, k)

    def next_u64(self) -> int:
        self._counter += 1
        return _mix((self.key + self._counter * _GAMMA) & _MASK)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * _TWO_POW_53

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        # rejection keeps the result exactly uniform
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def choice(self, seq: Sequence[T]) -> T:
        return seq[self.below(len(seq))]

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        """``k`` distinct elements of ``seq`` (partial Fisher-Yates)."""
        pool = list(seq)
        if not 0 <= k <= len(pool):
            raise ValueError("sample size out of range")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def uniform_angle(self) -> float:
        return 2.0 * math.pi * self.random()

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self.key:#018x})"

"""Portable deterministic random numbers.

SplitMix64 is used everywhere randomness is needed so fixtures, splits and
rollout noise are byte-identical across platforms and easy to reimplement
elsewhere. Independent streams are derived with ``derive_seed(seed, *tags)``,
one stream per instance/component.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def derive_seed(seed: int, *tags: int | str) -> int:
    """Child seed for an independent stream, keyed by the given tags."""
    state = seed & _MASK
    for tag in tags:
        t = _fnv1a64(tag.encode("utf-8")) if isinstance(tag, str) else tag & _MASK
        state = _mix(state ^ t) ^ _GAMMA
    return _mix(state)


class PortableRng:
    """SplitMix64 generator with the few distributions this package needs."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("below() needs n > 0")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.below(hi - lo + 1)

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Gaussian sample via Box-Muller; consumes two uniforms."""
        u1 = self.uniform()
        if u1 <= 0.0:
            u1 = 2.0**-53
        u2 = self.uniform()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: list):
        return items[self.below(len(items))]

"""Seedable random streams with pure integer state.

Everything downstream (scenario draws, persona decisions, model init,
shuffles) pulls from these streams, so a 64-bit seed pins the whole
pipeline without depending on any platform RNG.  The generator is
xoshiro256** seeded through splitmix64.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def derive_seed(base: int, *components: int) -> int:
    """Mix a base seed with integer components into a new 64-bit seed.

    Used to give each persona/episode/model its own independent stream.
    """
    state = base & _MASK
    for c in components:
        state, out = splitmix64(state ^ (c & _MASK))
        state = out
    state, out = splitmix64(state)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** stream; all draws derive from 64-bit integer outputs."""

    def __init__(self, seed: int):
        s = seed & _MASK
        self.s = []
        for _ in range(4):
            s, out = splitmix64(s)
            self.s.append(out)
        # a gaussian is produced in pairs; cache the spare
        self._gauss_spare: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniform01(self) -> float:
        """Uniform in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + self.uniform01() * (hi - lo)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection (unbiased)."""
        if n <= 0:
            raise ValueError("randint needs n > 0")
        limit = (_MASK + 1) - ((_MASK + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def normal(self, mean: float = 0.0, sd: float = 1.0) -> float:
        """Box-Muller gaussian (pair-cached)."""
        if self._gauss_spare is not None:
            z = self._gauss_spare
            self._gauss_spare = None
            return mean + sd * z
        while True:
            u1 = self.uniform01()
            if u1 > 0.0:
                break
        u2 = self.uniform01()
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._gauss_spare = r * math.sin(theta)
        return mean + sd * r * math.cos(theta)

    def bernoulli(self, p: float) -> bool:
        return self.uniform01() < p

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx

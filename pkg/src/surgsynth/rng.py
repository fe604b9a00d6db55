"""Portable deterministic random number generation.

Everything random in the pipeline flows through the PCG32 generator below so
that a given seed reproduces bit-identical output on any platform and any
Python/numpy version. The algorithms are pinned by their constants:

* PCG32 (pcg32_random_r from the PCG reference implementation):
  state' = state * 6364136223846793005 + inc, output is a 32-bit
  xorshift-rotate of the old state. `inc` encodes the stream id.
* splitmix64: mixing constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9,
  0x94D049BB133111EB (Steele et al.).
* FNV-1a 64-bit string hash: offset 0xCBF29CE484222325, prime 0x100000001B3.

Named sub-streams are derived from a master seed so that adding draws to one
concern (e.g. lighting) never perturbs another (e.g. trajectories).
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1

_PCG_MULT = 6364136223846793005
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def splitmix64(x: int) -> int:
    """One splitmix64 step: maps a 64-bit value to a well-mixed 64-bit value."""
    x = (x + _SPLITMIX_GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return (x ^ (x >> 31)) & MASK64


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of a string's UTF-8 bytes."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def mix_seed(master_seed: int, salt: int) -> int:
    """Combine a master seed with a salt into a new 64-bit seed."""
    return splitmix64((master_seed & MASK64) ^ (salt & MASK64))


class Pcg32:
    """PCG32 generator (XSH-RR variant, 64-bit state, 32-bit output)."""

    def __init__(self, seed: int, stream: int = 0):
        self._state = 0
        self._inc = (((stream & MASK64) << 1) | 1) & MASK64
        self._next_u32()
        self._state = (self._state + (seed & MASK64)) & MASK64
        self._next_u32()

    def _next_u32(self) -> int:
        old = self._state
        self._state = (old * _PCG_MULT + self._inc) & MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & MASK32

    def next_u32(self) -> int:
        return self._next_u32()

    def next_u64(self) -> int:
        hi = self._next_u32()
        return (hi << 32) | self._next_u32()

    def random(self) -> float:
        """Uniform double in [0, 1) built from 53 random bits."""
        a = self._next_u32() >> 5   # 27 bits
        b = self._next_u32() >> 6   # 26 bits
        return (a * 67108864.0 + b) / 9007199254740992.0

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        threshold = (1 << 32) % n
        while True:
            r = self._next_u32()
            if r >= threshold:
                return r % n

    def randrange(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] inclusive."""
        return lo + self.randint(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items):
        return items[self.randint(len(items))]


def stream(master_seed: int, name: str, extra: int = 0) -> Pcg32:
    """Named sub-stream of a master seed.

    The stream seed is splitmix64(master ^ fnv1a64(name) ^ extra) and the PCG
    stream id is the name hash, so distinct names never share a sequence.
    """
    salt = fnv1a64(name) ^ (extra & MASK64)
    return Pcg32(mix_seed(master_seed, salt), stream=fnv1a64(name))

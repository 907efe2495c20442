"""SplitMix64 PRNG with named child streams.

One root generator per experiment. Every consumer (jitter models, fault
triggers, weight/frame synthesis) takes its own child stream, so the number
of draws one consumer makes can never shift the values another one sees.
Child streams are derived from the parent's base seed, not from its current
state: creating or using siblings in any order yields the same streams.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """SplitMix64 output function."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash over a byte string."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def derive_seed(seed: int, name: str) -> int:
    """Deterministic seed of the child stream `name` under root `seed`."""
    return mix64((seed & MASK64) ^ fnv1a64(name.encode("utf-8")))


class Rng:
    """A single 64-bit SplitMix64 stream."""

    __slots__ = ("_seed", "_state")

    def __init__(self, seed: int):
        self._seed = seed & MASK64
        self._state = self._seed

    @property
    def seed(self) -> int:
        """Base seed this stream was created with; drives child derivation."""
        return self._seed

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 significant bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randrange(self, n: int) -> int:
        """Integer in [0, n). Modulo bias is negligible for n << 2**64."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return self.next_u64() % n

    def child(self, name: str) -> "Rng":
        """Independent named substream, unaffected by draws made on self."""
        return Rng(derive_seed(self._seed, name))

    def __repr__(self) -> str:
        return f"Rng(seed=0x{self._seed:016x})"

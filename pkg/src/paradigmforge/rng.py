"""Deterministic random number generation for every sampling path.

All randomness in the pipeline flows through SplitMix64 so that a seed
reproduces byte-identical sampling sequences on any platform. Streams for
unrelated purposes are derived with :func:`derive_seed`, which hashes a seed
together with string labels; this keeps streams independent without any
draw-order coupling between pipeline stages.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1

# SplitMix64 constants (Steele, Lea & Flood; the de-facto reference stream).
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class Rng:
    """SplitMix64 generator with a 64-bit state.

    The sequence is bit-exact across platforms: Python integers emulate the
    wrapping 64-bit arithmetic of the reference implementation.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) consuming exactly one draw.

        Uses the multiply-high reduction, so there is no rejection loop and
        the draw count per sample is fixed (the bias for n << 2**64 is
        negligible and irrelevant to determinism).
        """
        if n <= 0:
            raise ValueError(f"below() needs a positive bound, got {n}")
        return (self.next_u64() * n) >> 64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of the next draw."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def choice(self, items):
        if not items:
            raise ValueError("cannot choose from an empty sequence")
        return items[self.below(len(items))]

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """Draw k distinct indices from range(n), in draw order, k draws."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct items from {n}")
        pool = list(range(n))
        out = []
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
            out.append(pool[i])
        return out

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, *labels: str) -> int:
    """Derive an independent 64-bit seed from a base seed and string labels."""
    h = hashlib.sha256()
    h.update(str(seed & _MASK64).encode("ascii"))
    for label in labels:
        h.update(b"\x1f")
        h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def stable_order_key(seed: int, label: str, item_id: str) -> bytes:
    """Sort key for seeded orderings that must not depend on input order.

    Sorting ids by this key yields a pseudo-random permutation that is a pure
    function of (seed, label, id), hence invariant under permutation of the
    input collection.
    """
    h = hashlib.sha256()
    h.update(str(seed & _MASK64).encode("ascii"))
    h.update(b"\x1f")
    h.update(label.encode("utf-8"))
    h.update(b"\x1f")
    h.update(item_id.encode("utf-8"))
    return h.digest()

"""Portable SplitMix64 generator.

Kernel seeds are the only thing that travels on the wire, so every party must
rebuild the same kernel from the same seed. numpy's ``Generator`` gives no
cross-version guarantee for its distribution methods, hence this small,
fully specified generator:

* state update: ``state += 0x9E3779B97F4A7C15 (mod 2**64)``
* output: ``mix64(state)`` with the standard SplitMix64 finaliser
* ``uniform()``: top 53 bits of the output times ``2**-53``, in ``[0, 1)``

Normals for kernel weights are built from these uniforms in
:mod:`drocks.rocket`.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finaliser (Stafford variant 13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Hash a tuple of non-negative integers into one 64-bit seed.

    ``h = 0; for x in parts: h = mix64(h ^ mix64(x + GOLDEN_GAMMA))``
    """
    h = 0
    for x in parts:
        if x < 0:
            raise ValueError("derive_seed parts must be non-negative")
        h = mix64(h ^ mix64((x + GOLDEN_GAMMA) & MASK64))
    return h


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def integer(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` via ``floor(uniform() * n)``."""
        return min(int(self.uniform() * n), n - 1)

    def seeds(self, count: int, exclude=()) -> list[int]:
        """Draw ``count`` distinct 64-bit seeds, redrawing collisions with ``exclude``."""
        taken = set(exclude)
        out = []
        while len(out) < count:
            s = self.next_u64()
            if s in taken:
                continue
            taken.add(s)
            out.append(s)
        return out

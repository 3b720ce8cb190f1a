"""Seeded random streams.

Every random draw in a run comes from a generator keyed by
``(seed, stream, index)``, so the draw for evaluation ``i`` never depends
on how many workers ran or in which order evaluations finished.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# stream identifiers
BASELINE = 1
PERMUTATION = 2
LIME_SAMPLES = 3
KERNEL_SAMPLES = 4


def stream(seed: int, kind: int, index: int = 0) -> np.random.Generator:
    """Independent PCG64 generator for one (seed, stream, index) triple."""
    return np.random.default_rng([int(seed) & MASK64, kind, index])


class SplitMix64:
    """SplitMix64 sequence (Steele, Lea, Flood 2014).

    Used for model parameter init because its output is defined bit-for-bit
    by integer arithmetic, so goldens are portable.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float, size: int) -> np.ndarray:
        return np.array([low + (high - low) * self.next_float() for _ in range(size)])

"""Seeded random streams.

All randomness flows through numpy generators derived from a master seed plus
an integer path (trial index, sub-stream index, ...).  Streams derived from
the same (seed, path) are identical no matter how trials are scheduled across
processes, which is what makes transcripts and Monte Carlo estimates
replayable.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Root generator for a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent stream addressed by (seed, path)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def random_bits(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform 0/1 vector of the given length."""
    return rng.integers(0, 2, size=count, dtype=np.uint8)

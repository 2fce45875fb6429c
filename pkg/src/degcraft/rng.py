"""Seeded random streams.

Every random draw in the package goes through a :class:`numpy.random.Generator`
created here.  Child streams are derived with SplitMix64 so that work item
``i`` of a job always sees the same stream no matter which worker runs it.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output step applied to ``x`` (64-bit wraparound)."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def mix(master_seed: int, index: int) -> int:
    """Derive the 64-bit seed of child stream ``index`` from ``master_seed``.

    ``mix(s, i) = splitmix64(splitmix64(s) ^ splitmix64(i + 1))``; distinct
    indices give unrelated seeds and the result depends only on ``(s, i)``.
    """
    if index < 0:
        raise ValueError("stream index must be non-negative")
    return splitmix64(splitmix64(master_seed & _MASK) ^ splitmix64((index + 1) & _MASK))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _MASK))


def child_rng(master_seed: int, index: int) -> np.random.Generator:
    return make_rng(mix(master_seed, index))

"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`. The bit
generator is numpy's Philox-4x64 (a counter-based generator whose output
stream numpy guarantees to be stable across platforms and releases); its key
is derived by :class:`numpy.random.SeedSequence` from the user seed followed by
any number of integer stream keys. Two calls with the same ``(seed, *keys)``
always return generators producing identical streams, independent of call
order, so work can be split across threads without changing results.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return an independent generator for the stream ``(seed, *keys)``."""
    entropy = [check_seed(seed)] + [int(k) for k in keys]
    if any(k < 0 for k in entropy):
        raise ValueError("stream keys must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

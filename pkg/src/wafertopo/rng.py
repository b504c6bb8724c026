"""Deterministic, stream-split random number generation.

All stochastic code in the package draws from Philox counter-based
generators keyed by (seed, stream_id).  Philox output is platform and
thread-count independent, so identical keys reproduce identical sequences
everywhere.  Stages of a generator (base pattern, texture, defects, ...)
each get their own stream so that toggling one stage never perturbs the
draws of another.
"""
from __future__ import annotations

import numpy as np

# Stream ids used by the synthetic generators.
STREAM_BASE = 0
STREAM_TEXTURE = 1
STREAM_DEFECT = 2
STREAM_NOISE = 3


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Generator for (seed, stream_id); distinct streams are independent."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = (np.uint64(seed).item() << 32) | (stream_id & 0xFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def item_seed(master_seed: int, index: int) -> int:
    """Derived per-item seed so dataset items can be generated independently."""
    # splitmix64-style mix keeps derived seeds well separated
    z = (master_seed + 0x9E3779B97F4A7C15 * (index + 1)) % (1 << 64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 % (1 << 64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB % (1 << 64)
    return (z ^ (z >> 31)) % (1 << 63)

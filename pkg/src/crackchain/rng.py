"""Seed splitting.

Every random stream in the package is ``numpy.random.Generator(PCG64)``
seeded from ``SeedSequence(master_seed, spawn_key=keys)``. The key tuple
names the consumer (for instance ``(STREAM_ENSEMBLE, path_index)``), so a
stream depends only on the master seed and its key, never on how many
other streams were drawn or on worker scheduling.
"""

from __future__ import annotations

import numpy as np

STREAM_GENERATE = 1
STREAM_COVARIOGRAM = 2
STREAM_ENSEMBLE = 3
STREAM_TRAINING = 4
STREAM_FIT = 5
STREAM_SELFTEST = 6


def generator(master_seed: int, *keys: int) -> np.random.Generator:
    if master_seed < 0:
        raise ValueError("seeds must be non-negative integers")
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys)))


def child_seed(master_seed: int, *keys: int) -> int:
    """A 63-bit integer seed for a sub-task, stable across runs."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))

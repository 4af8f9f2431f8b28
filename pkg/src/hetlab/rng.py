"""
Seed derivation for reproducible, worker-count independent random streams.

Every stream is a NumPy ``Generator`` over ``PCG64`` whose state is produced by
``numpy.random.SeedSequence(entropy=master_seed, spawn_key=key)``. ``key`` is a
tuple of non-negative integers naming the stream, for example ``(i, j)`` for
heatmap cell ``(i, j)`` or ``(STREAM_CHUNK, k)`` for the k-th Monte-Carlo
chunk. SeedSequence hashes ``(entropy, spawn_key)`` with its documented
mixing function, so

* the same ``(master_seed, key)`` always yields the same bit stream, and
* streams with different keys are statistically independent.

Work is always split into a fixed number of keyed streams that does not depend
on how many workers execute them, which is what makes results identical for
``--threads 1`` and ``--threads 8``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# top-level stream namespaces; keep values stable, they are part of the output contract
STREAM_PATH = 0
STREAM_CHUNK = 1
STREAM_CELL = 2
STREAM_AUX = 3


def normalize_seed(seed: int) -> int:
    """Reduce an arbitrary integer seed to the 64-bit master seed."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return seed & MASK64


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under master ``seed``."""
    ss = np.random.SeedSequence(entropy=normalize_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a 64-bit child master seed (used to hand a whole sub-experiment its own seed)."""
    ss = np.random.SeedSequence(entropy=normalize_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])

"""Named, independent random streams.

Every source of randomness in the package draws from its own stream, derived
from one user-facing seed plus a purpose tag. Toggling one feature (say,
relation corruption) therefore never shifts the draws of another (say,
initialization), and re-deriving a stream reproduces its draws exactly.
"""
from __future__ import annotations

import numpy as np

STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_NEGATIVES = 2
STREAM_DATAGEN = 3
STREAM_VERIFY = 4


def named_stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))

"""Reproducible random streams keyed by (seed, *indices).

Every stream is a Philox generator (counter-based) seeded from a
``SeedSequence`` whose spawn key is the index path, so the stream assigned to
campaign ``k``, block ``b`` never depends on scheduling order.
"""

from __future__ import annotations

import numpy as np

DEFAULT_SEED = 3735928559
SEED_ENV_VAR = "EQONE_SEED"

# Reserved spawn-key prefix for bootstrap resampling streams.
BOOTSTRAP_KEY = 0xB0075


def stream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))

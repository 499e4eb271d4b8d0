"""Splittable, counter-style seeding.

Every random draw in the package goes through ``substream``, which derives an
independent generator from a 64-bit base seed and an integer path. The same
(seed, path) pair always yields the same stream, independent of thread or
process scheduling, so Monte Carlo grids are reproducible under any degree of
parallelism.
"""

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return a Generator for the given base seed and derivation path."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.default_rng(ss)

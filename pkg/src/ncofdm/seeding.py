"""Deterministic per-task random streams derived from one master seed.

Every Monte-Carlo loop in the package draws its generator from
``derive_rng(master_seed, *indices)`` so that results do not depend on
execution order or worker count.
"""

from __future__ import annotations

import numpy as np


def derive_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Generator for the sub-stream identified by ``indices``.

    The same (seed, indices) pair always yields the same stream; distinct
    index tuples yield statistically independent streams.
    """
    ss = np.random.SeedSequence([int(master_seed), *[int(i) for i in indices]])
    return np.random.default_rng(ss)

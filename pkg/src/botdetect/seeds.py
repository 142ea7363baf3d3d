"""Deterministic seed derivation.

Every stochastic task (restart, tree, fold, permutation) gets its own
generator derived from the master seed and the task's ordinal path, so
results never depend on execution order or worker count.
"""

from __future__ import annotations

import numpy as np


def derived_rng(master_seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, *path])


def derived_int(master_seed: int, *path: int) -> int:
    """A 32-bit seed for libraries that take a plain integer."""
    return int(np.random.SeedSequence([master_seed, *path]).generate_state(1)[0])

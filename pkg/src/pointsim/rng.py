"""Seeded random streams.

Every trial draws from its own generator derived from ``(master_seed, trial_index)``
so results do not depend on execution order.
"""

from __future__ import annotations

import numpy as np


def trial_seed_sequence(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed_sequence(master_seed, index))


def trial_rngs(master_seed: int, index: int, n: int) -> list[np.random.Generator]:
    """``n`` independent generators for one trial, e.g. one per noise source."""
    return [np.random.default_rng(s) for s in trial_seed_sequence(master_seed, index).spawn(n)]


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)

"""Named random substreams.

Every random draw in a scenario comes from a generator derived from one
64-bit master seed, the iteration index and a fixed role id, so each
generator role (users, blockers, shadowing, ...) can be replayed alone.
"""

from __future__ import annotations

import numpy as np

ROLES = {
    "users": 1,
    "blockers": 2,
    "shadowing": 3,
    "parents": 4,
}


def substream(seed: int, iteration: int, role: str) -> np.random.Generator:
    if role not in ROLES:
        raise KeyError(f"unknown rng role {role!r}")
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(iteration), ROLES[role]))
    return np.random.default_rng(ss)


def as_generator(rng_seed) -> np.random.Generator:
    """Accept a Generator, an int seed or None."""
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)

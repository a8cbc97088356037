"""Seed derivation. Every replicate gets a generator derived from (master seed, key path)."""

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def replicate_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent stream for the replicate at ``path``; order of creation does not matter."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def replicate_seed(seed: int, *path: int) -> int:
    """A 63-bit integer seed derived from (seed, path), for configs that carry a plain int."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(path)).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))

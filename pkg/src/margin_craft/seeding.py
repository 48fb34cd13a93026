"""Random number generation.

Every random draw in margin-craft comes from numpy's PCG64 bit generator seeded through
``numpy.random.SeedSequence(seed, spawn_key=keys)``. A replicate, restart or permutation index is
passed as a key, so each stream depends only on ``(seed, keys)`` and never on execution order or on
global generator state.
"""
from typing import Final

import numpy as np

MAX_SEED: Final[int] = 2**64 - 1


def rng(seed: int, *keys: int) -> np.random.Generator:
    """Creates the generator for a seed and a key path

    Args:
        seed (int): 64-bit unsigned seed
        *keys (int): stream keys, e.g. (replicate index, restart index)

    Returns:
        np.random.Generator: PCG64 generator
    """
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer: {seed}")
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed: int, *keys: int) -> int:
    """Derives an independent 64-bit seed for APIs that take a seed rather than a generator

    Args:
        seed (int): 64-bit unsigned seed
        *keys (int): stream keys

    Returns:
        int: derived seed
    """
    return int(rng(seed, *keys).integers(MAX_SEED, dtype=np.uint64, endpoint=True))

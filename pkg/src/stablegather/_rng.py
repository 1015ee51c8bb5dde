"""Seeded random streams.

Every consumer of randomness gets its own PCG64 generator derived from a
64-bit seed and a fixed integer stream label through numpy's
``SeedSequence`` (spawn_key = (label, *key)).  PCG64 and SeedSequence are
both fully specified by numpy and stable across platforms, so a given
(seed, label, key) always yields the same stream, and adding a new
consumer never shifts the draws of an existing one.
"""

import numpy as np

STREAMS = {
    "placement": 1,   # per-node initial position and waypoints
    "static": 2,      # choice of the static node subset
    "leader": 3,      # root selection for every discovered tree
    "coverage": 4,    # coverage probe locations
    "profile": 5,     # grid: mobility profile seeds
    "run": 6,         # grid: per-run seeds
}

SEED_MAX = 2**64 - 1


def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must lie in [0, 2**64), got {seed}")
    return seed


def _sequence(seed, label, key):
    return np.random.SeedSequence(check_seed(seed), spawn_key=(STREAMS[label], *map(int, key)))


def stream(seed, label: str, *key) -> np.random.Generator:
    """Independent generator for ``label`` (and optional integer ``key``)."""
    return np.random.Generator(np.random.PCG64(_sequence(seed, label, key)))


def derive_seed(seed, label: str, *key) -> int:
    """A child 64-bit seed, e.g. one per grid cell and profile index."""
    return int(_sequence(seed, label, key).generate_state(1, np.uint64)[0])

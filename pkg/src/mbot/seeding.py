"""Deterministic derivation of independent random streams.

Every randomized component draws from a generator derived from a user seed
plus a small integer path, so results are bit-identical no matter how work
is scheduled across threads.
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# Path tags for the major stream families. Values are arbitrary but frozen:
# changing them changes every seeded output.
BATCH_X = 1
BATCH_Y = 2
INNER_CELL = 3
EVAL = 4
STEP = 5
PROPOSAL = 6
PILOT = 7
RESAMPLE = 8


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for stream (seed, *path); independent across distinct paths."""
    entropy = [int(seed) & _MASK64] + [int(p) & _MASK64 for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *path: int) -> int:
    """64-bit child seed for handing to a component that takes a plain seed."""
    state = np.random.SeedSequence(
        [int(seed) & _MASK64] + [int(p) & _MASK64 for p in path]
    ).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])

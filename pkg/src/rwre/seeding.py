"""Splittable, counter-based random streams.

Every random stream in the toolkit is a Philox generator keyed by a
``SeedSequence`` built from the master seed plus a tuple of non-negative
integers (run index, block index, site coordinates...).  Streams therefore
depend only on *what* is being computed, never on the order in which work is
scheduled.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# spawn-key namespaces so that e.g. run 3 and site (3,) never share a stream
WALK_RUNS = 1
ENV_SITES = 2
ENV_BLOCKS = 3
MC_BLOCKS = 4
WALK_BLOCKS = 5


def zigzag(n: int) -> int:
    """Map a signed integer to a non-negative one bijectively."""
    n = int(n)
    return 2 * n if n >= 0 else -2 * n - 1


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in key))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *key)))


def block_ranges(n_items: int, block_size: int):
    """Fixed partition of ``range(n_items)`` into consecutive blocks."""
    for b, start in enumerate(range(0, n_items, block_size)):
        yield b, start, min(start + block_size, n_items)

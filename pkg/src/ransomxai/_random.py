"""Named random substreams.

Every stochastic step draws from a generator derived from the run seed plus a
tuple of keys (strings or ints), so results never depend on evaluation order
or thread count.
"""
import zlib

import numpy as np


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k) & 0xFFFFFFFF


def derive_seed(seed, *keys):
    """Return a 64-bit integer seed for the substream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys))

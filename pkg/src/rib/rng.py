"""Seeded random streams.

Every randomized operation draws from a generator derived from a master
seed and a purpose string, so that e.g. the mini-batch order of the encoder
never depends on whether a critic is also being trained. Streams use the
Philox-4x64 counter-based bit generator with a ``SeedSequence`` whose spawn
key is the CRC-32 of the purpose name.
"""

import zlib

import numpy as np

MAX_SEED = 2**64 - 1


def stream(seed, purpose, *index):
    """Return an independent generator for ``(seed, purpose, *index)``.

    >>> a = stream(0, "batch").random()
    >>> b = stream(0, "batch").random()
    >>> a == b
    True
    """
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    key = (zlib.crc32(purpose.encode("utf-8")),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, purpose, *index):
    """A child integer seed, for handing to code that takes plain seeds."""
    return int(stream(seed, purpose, *index).integers(0, 2**63 - 1))

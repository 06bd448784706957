"""
Seeded random streams.

Every stream is a numpy ``Generator`` over the counter-based ``Philox`` bit
generator. Sub-streams are addressed by a tuple of keys (strings or integers)
that becomes the ``SeedSequence`` spawn key, so a sub-task's stream depends
only on (seed, keys) and never on how much another stream was consumed.
"""

import zlib
from typing import Union

import numpy as np

Key = Union[str, int]
Rng = np.random.Generator

_MASK64 = (1 << 64) - 1


def _key_to_int(key: Key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def _seed_sequence(seed: int, keys) -> np.random.SeedSequence:
    spawn_key = tuple(_key_to_int(k) for k in keys)
    return np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=spawn_key)


def make_rng(seed: int, *keys: Key) -> Rng:
    """Return the generator for ``seed`` and the sub-stream named by ``keys``."""
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, keys)))


def derive_seed(seed: int, *keys: Key) -> int:
    """Derive a 63-bit integer seed for a named sub-task."""
    state = _seed_sequence(seed, keys).generate_state(1, dtype=np.uint64)[0]
    return int(state) >> 1

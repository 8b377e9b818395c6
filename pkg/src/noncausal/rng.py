"""Seed handling.

Every stochastic routine takes an explicit integer seed. Streams are built on
the counter-based Philox bit generator, and child streams are derived from
``(seed, *keys)`` through ``SeedSequence`` so that replication ``i`` of a cell
gets the same numbers no matter how the work is scheduled.
"""
from __future__ import annotations

import zlib

import numpy as np


def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.SeedSequence(entropy)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))


def spawn(seed: int, n: int, *keys: int) -> list[np.random.Generator]:
    children = seed_sequence(seed, *keys).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def stable_hash(text: str) -> int:
    """Process-independent 32-bit hash of a label (``hash()`` is salted)."""
    return zlib.crc32(text.encode("utf-8"))


def derive_seed(seed: int, *keys: int) -> int:
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0])

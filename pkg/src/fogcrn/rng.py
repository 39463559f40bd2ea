"""Seeded random streams.

Every random draw in the package goes through numpy's PCG64 bit generator.
Simulation subsystems get independent, labeled streams derived from one
master seed, so changing how much randomness one subsystem consumes never
perturbs another.
"""
from __future__ import annotations

import zlib

import numpy as np

def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator for an int seed, SeedSequence or Generator.

    A Generator is passed through unchanged so callers can share state.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None:
        raise ValueError("an explicit seed is required for reproducibility")
    return np.random.Generator(np.random.PCG64(int(seed)))


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(master_seed: int, label: str, *index: int) -> np.random.Generator:
    """Independent generator for ``label`` (plus optional integer indices)."""
    key = (label_key(label),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(master_seed: int, label: str, *index: int) -> int:
    """A 63-bit integer seed derived like :func:`stream`, for APIs taking ints."""
    key = (label_key(label),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))

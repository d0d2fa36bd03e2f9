"""Seed derivation.

Every random stream in a run is derived from one 64-bit seed plus a stream
name, so adding a new stream never perturbs the existing ones. Trial seeds
for experiments are derived the same way from a base seed and the trial
index; trial ``t`` gets the same seed no matter how many trials are run.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np

__all__ = ["split_seed", "stream_seed", "stream_rng", "numpy_rng"]


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=4).digest(), "big")


def split_seed(base: int, index: int) -> int:
    """Seed for trial ``index`` under ``base`` (``SeedSequence`` spawn key)."""
    seq = np.random.SeedSequence(int(base), spawn_key=(int(index),))
    return int(seq.generate_state(1, np.uint64)[0])


def stream_seed(seed: int, name: str) -> int:
    seq = np.random.SeedSequence(int(seed), spawn_key=(0xC0FFEE, _name_key(name)))
    state = seq.generate_state(2, np.uint64)
    return (int(state[0]) << 64) | int(state[1])


def stream_rng(seed: int, name: str) -> random.Random:
    return random.Random(stream_seed(seed, name))


def numpy_rng(seed: int, name: str = "numpy") -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0xBEEF, _name_key(name))))

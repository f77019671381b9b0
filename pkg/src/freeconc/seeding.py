"""Reproducible per-trial random streams.

Trial ``t`` of a run with base seed ``s`` draws from a Philox generator
keyed by ``mix(s, t)``, where ``mix`` is the SplitMix64 finalizer applied
to ``s`` and then to the result xor'ed with ``t``.  Streams therefore do
not depend on how trials are scheduled across threads.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(base_seed: int, index: int) -> int:
    """64-bit avalanche combination of a base seed and a trial index."""
    return splitmix64(splitmix64(int(base_seed) & MASK64) ^ (int(index) & MASK64))


def generator(seed: int) -> np.random.Generator:
    """Philox-backed generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def trial_generator(base_seed: int, trial: int) -> np.random.Generator:
    return generator(mix(base_seed, trial))

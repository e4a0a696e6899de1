"""Deterministic random streams.

All stochastic operations in the package draw from named Philox streams.
Philox is a 64-bit counter-based generator, so a stream is fully determined
by (seed, path): the same coordinates always yield the same values, and
independent coordinates yield independent streams.  That makes every result
reproducible and schedule-independent — work items (augmentation variants,
perturbation samples, dropout masks) can be computed in any order or
concurrently without changing the output.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int, *path: int | str) -> np.random.Generator:
    """Return the generator for stream (seed, *path).

    ``path`` components may be ints or short strings; strings are folded to
    ints so callers can use readable labels like stream(seed, "angle", i).
    """
    key = tuple(_fold(p) for p in path)
    seq = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def _fold(part: int | str) -> int:
    if isinstance(part, str):
        h = 1469598103934665603  # FNV-1a 64-bit
        for byte in part.encode("utf-8"):
            h = ((h ^ byte) * 1099511628211) & (2**64 - 1)
        return h
    return int(part) & (2**64 - 1)

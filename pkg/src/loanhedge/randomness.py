"""Deterministic random-number streams.

All Monte Carlo code in this package draws from numpy ``Generator`` objects
backed by PCG64 and seeded through ``SeedSequence``, with normals produced by
numpy's ziggurat ``standard_normal``.  Independent streams (per path chunk,
per experiment cell, per evaluation repeat) are derived by spawning the
``SeedSequence`` with an explicit integer key, so results are reproducible
regardless of thread scheduling or chunk sizes.
"""

from __future__ import annotations

import numpy as np


def make_generator(seed: int, stream: tuple[int, ...] = ()) -> np.random.Generator:
    """Return the PCG64 generator for ``seed`` and an optional stream key.

    The same ``(seed, stream)`` pair always yields the same generator state.
    """
    ss = np.random.SeedSequence(seed, spawn_key=stream)
    return np.random.Generator(np.random.PCG64(ss))


def spawn_generators(seed: int, n: int, stream: tuple[int, ...] = ()) -> list[np.random.Generator]:
    """Return ``n`` independent generators derived from ``(seed, stream)``."""
    return [make_generator(seed, stream + (i,)) for i in range(n)]

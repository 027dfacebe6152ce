"""Counter-based randomness: one Philox stream per (seed, path index).

Each path owns an independent keyed stream, so its increments do not depend
on how a batch is partitioned across workers or on how many paths surround
it.  Coupled batches get common noise for free by reusing the same seed and
path indices.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

_MASK = (1 << 64) - 1


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    key = np.array([seed & _MASK, path_index & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def brownian_increments(seed: int, n_paths: int, n_steps: int, d: int, h: float) -> np.ndarray:
    """Gaussian increments of variance h per axis, shape (n_paths, n_steps, d)."""
    out = np.empty((n_paths, n_steps, d))
    sqh = math.sqrt(h)
    for i in range(n_paths):
        out[i] = path_generator(seed, i).standard_normal((n_steps, d))
    out *= sqh
    out.flags.writeable = False
    return out


def buffer_checksum(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()

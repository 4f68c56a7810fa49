"""Seed plumbing shared by every Monte Carlo routine.

Work is split into fixed-size indexed chunks; chunk ``i`` of a stream keyed
by ``(seed, *keys)`` always draws from the same generator, so any evaluation
order gives identical results.
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

CHUNK = 4096


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *(int(k) for k in keys)])


def chunk_sizes(total: int, chunk: int = CHUNK):
    """Yield ``(index, size)`` pairs covering ``total`` items."""
    start, i = 0, 0
    while start < total:
        size = min(chunk, total - start)
        yield i, size
        start += size
        i += 1


def digest(*parts) -> str:
    """Short reproducibility token for a tuple of JSON-able / array inputs."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part, dtype=float).tobytes())
        else:
            h.update(json.dumps(part, sort_keys=True, default=repr).encode())
    return h.hexdigest()[:16]

"""Deterministic randomness helpers.

All randomness in the library flows from a single master seed.  Substreams
are derived with fixed, name-based spawn keys, so the same master seed
always yields the same stream regardless of call order or threading.
"""

from __future__ import annotations

import os
import zlib

import numpy as np


def _tag_key(tag: int | str) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode("utf-8"))
    return int(tag) & 0xFFFFFFFF


def child_seed(master: int, *tags: int | str) -> np.random.SeedSequence:
    """Seed sequence for the substream named by ``tags`` under ``master``."""
    return np.random.SeedSequence(entropy=int(master) & (2**64 - 1),
                                  spawn_key=tuple(_tag_key(t) for t in tags))


def rng_from(master: int, *tags: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_seed(master, *tags)))


def thread_count() -> int:
    """Parallelism cap from FBLLAB_THREADS (default 1 = sequential)."""
    raw = os.environ.get("FBLLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Map preserving order; uses a thread pool when FBLLAB_THREADS > 1.

    Results are reduced by the callers with order-independent operations
    (maxima), so threading never changes reported values.
    """
    items = list(items)
    workers = thread_count()
    if workers > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]

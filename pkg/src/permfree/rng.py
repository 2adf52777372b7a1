"""Counter-style random streams and an order-preserving worker pool.

Every stream is derived from ``(seed, role, index)`` alone, so results do not
depend on how work is split across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

ROLES = {
    "perm": 1,
    "perm-top": 2,
    "perm-bottom": 3,
    "ensemble": 4,
    "demo": 5,
}

#: Sampled permutation tuples are drawn in blocks of this many, one stream per block.
PERM_BLOCK = 4096


def stream(seed: int, role: str, index: int, *extra: int) -> np.random.Generator:
    key = (ROLES[role], int(index)) + tuple(int(x) for x in extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key)))


def worker_count() -> int:
    raw = os.environ.get("PERMFREE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``[fn(x) for x in items]``, possibly on a thread pool; output order is input order."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def random_permutations(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """``count`` independent uniform permutations of range(n), one per row (Fisher-Yates)."""
    base = np.broadcast_to(np.arange(n, dtype=np.int64), (count, n))
    return rng.permuted(base, axis=1)


def invert_rows(perms: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perms)
    rows = np.arange(perms.shape[0])[:, None]
    inv[rows, perms] = np.arange(perms.shape[1])
    return inv

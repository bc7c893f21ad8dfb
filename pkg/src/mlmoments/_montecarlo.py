"""Seeded, batched Monte-Carlo plumbing shared by the solver and estimators.

Every batch draws from its own stream derived from `(seed, *key, batch)`, so
results do not depend on the number of worker threads nor on the order in
which batches finish.
"""
import logging
import os
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from mlmoments.exceptions import DomainError

logger = logging.getLogger(__name__)

T = TypeVar('T')

THREADS_ENV = 'MLMOM_THREADS'
DEFAULT_BATCH_SIZE = 65536
MAX_BATCH_ENTRIES = 2**24


def worker_count() -> int:
    """Number of worker threads allowed by `MLMOM_THREADS` (default 1)."""
    value = os.environ.get(THREADS_ENV, '1')
    try:
        count = int(value)
    except ValueError:
        logger.warning("Ignoring invalid %s=%r.", THREADS_ENV, value)
        return 1
    return max(1, count)


def check_seed(seed: int) -> int:
    if int(seed) != seed or seed < 0:
        raise DomainError(f"`seed` must be a non-negative integer, but got {seed}.")
    return int(seed)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Random generator for the sub-stream `(seed, *key)`."""
    return np.random.default_rng(np.random.SeedSequence([check_seed(seed), *key]))


def capped_batch_size(batch_size: int, width: int) -> int:
    """Batch size keeping a `(batch, width)` work array under 2**24 entries."""
    return max(1, min(batch_size, MAX_BATCH_ENTRIES // max(1, width)))


def batch_sizes(total: int, batch_size: int = DEFAULT_BATCH_SIZE) -> list[int]:
    if total < 1:
        raise DomainError(f"The number of Monte-Carlo draws must be >= 1, but got {total}.")
    full, rest = divmod(total, batch_size)
    return [batch_size]*full + ([rest] if rest else [])


def map_batches(fn: Callable[[int, int], T],
                total: int,
                batch_size: int = DEFAULT_BATCH_SIZE
                ) -> list[T]:
    """Apply `fn(batch_index, size)` to every batch, results in batch order."""
    sizes = batch_sizes(total, batch_size)
    workers = min(worker_count(), len(sizes))
    if workers == 1:
        return [fn(b, size) for b, size in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))

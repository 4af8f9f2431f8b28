"""Ordered fan-out of independent tasks over a worker pool."""

from __future__ import annotations

import os
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "HETLAB_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``$HETLAB_THREADS``, else the number of logical CPUs."""
    if threads is None:
        env = os.environ.get(ENV_THREADS)
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """
    Apply ``fn`` to every item and return results in input order.

    Tasks must be independent and carry their own seeds, so the result does
    not depend on ``threads``. ``fn`` must be picklable when ``threads > 1``.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))

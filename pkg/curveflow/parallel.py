"""Thread pool chunking.

Work is split in contiguous chunks, one task per chunk, and the results
are concatenated in input order so the outcome never depends on the
thread count.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from curveflow.errors import ConfigError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "CURVEFLOW_THREADS"


def resolve_threads(threads: Optional[int] = None) -> int:
    """Returns threads, else $CURVEFLOW_THREADS, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is None or env == "":
            return 1
        try:
            threads = int(env)
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from e
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    return threads


def chunks(items: Sequence[T], n: int) -> List[Sequence[T]]:
    n = max(1, n)
    return [items[i : i + n] for i in range(0, len(items), n)]


def map_chunks(
    func: Callable[[Sequence[T]], List[R]],
    items: Sequence[T],
    threads: Optional[int] = 1,
) -> List[R]:
    """Applies func to contiguous chunks of items and concatenates the results.

    Args:
        func: maps a chunk to a list with one result per item.
        items: work items.
        threads: worker count (see resolve_threads).
    """
    threads = resolve_threads(threads)
    if len(items) == 0:
        return []
    size = int(-(-len(items) // threads))
    pieces = chunks(items, size)
    if threads == 1 or len(pieces) == 1:
        results = [func(piece) for piece in pieces]
    else:
        logger.debug("mapping %d items over %d chunks", len(items), len(pieces))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(func, pieces))
    out: List[R] = []
    for result in results:
        out.extend(result)
    return out

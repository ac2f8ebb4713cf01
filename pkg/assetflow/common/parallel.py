"""
Worker Pool
Runs independent jobs concurrently and returns results in job order
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, TypeVar

from assetflow.common import config

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def worker_count(requested: Optional[int] = None) -> int:
    """Effective worker count, capped by ASSETFLOW_THREADS"""
    cap = max(1, config.ASSETFLOW_THREADS)
    if requested is None:
        return cap
    return max(1, min(int(requested), cap))


def run_jobs(fn: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None,
             label: str = "job") -> List[R]:
    """
    Apply fn to every item, possibly concurrently

    Args:
        fn: job function; exceptions propagate to the caller
        items: job inputs
        workers: requested worker count (capped by ASSETFLOW_THREADS)
        label: name used in progress logs

    Returns:
        Results ordered like items
    """
    n_workers = min(worker_count(workers), max(1, len(items)))
    total = len(items)
    results: List[Optional[R]] = [None] * total

    if n_workers == 1:
        for idx, item in enumerate(items):
            results[idx] = fn(item)
            logger.debug(f"{label} {idx + 1}/{total} done")
        return results  # type: ignore[return-value]

    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        futures = {executor.submit(fn, item): idx for idx, item in enumerate(items)}
        finished = 0
        for future in as_completed(futures):
            idx = futures[future]
            results[idx] = future.result()
            finished += 1
            logger.debug(f"{label} {finished}/{total} done (index {idx})")
    return results  # type: ignore[return-value]

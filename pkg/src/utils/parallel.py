"""
Thread pool helper and deterministic reductions.

Results are always combined in input order so values do not depend on the
number of worker threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Apply func to every item, possibly on a thread pool.

    Args:
        func: Callable applied to each item
        items: Inputs
        threads: Worker count; 1 runs inline

    Returns:
        Results in input order
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def pairwise_sum(values) -> complex:
    """
    Tree reduction of a flat array.

    The association order depends only on the array length, so equal inputs
    give bit-identical sums.
    """
    arr = np.asarray(values).ravel()
    if arr.size == 0:
        return arr.dtype.type(0)
    while arr.size > 1:
        if arr.size % 2:
            arr = np.concatenate([arr, np.zeros(1, dtype=arr.dtype)])
        arr = arr[0::2] + arr[1::2]
    return arr[0]

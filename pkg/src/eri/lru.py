"""
Least-recently-used cache bounded by the total size of stored arrays.
"""

import logging
import threading
from collections import OrderedDict
from typing import Callable, Hashable

import numpy as np

logger = logging.getLogger(__name__)


class ArrayLRU:
    """Thread-safe LRU of numpy arrays with a byte budget."""

    def __init__(self, budget_bytes: int, name: str = 'cache'):
        self.budget_bytes = int(budget_bytes)
        self.name = name
        self._entries: 'OrderedDict[Hashable, np.ndarray]' = OrderedDict()
        self._bytes = 0
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def nbytes(self) -> int:
        return self._bytes

    def get_or_compute(self, key: Hashable, compute: Callable[[], np.ndarray]) -> np.ndarray:
        """
        Return the cached array for key, computing and storing it on a miss.

        Two threads missing on the same key may both compute; the first
        stored value is kept and returned to both.
        """
        with self._lock:
            value = self._entries.get(key)
            if value is not None:
                self._entries.move_to_end(key)
                self.hits += 1
                return value
            self.misses += 1

        value = compute()
        value.setflags(write=False)
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                return existing
            if value.nbytes > self.budget_bytes:
                return value
            self._entries[key] = value
            self._bytes += value.nbytes
            while self._bytes > self.budget_bytes:
                _, evicted = self._entries.popitem(last=False)
                self._bytes -= evicted.nbytes
        return value

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self._bytes = 0

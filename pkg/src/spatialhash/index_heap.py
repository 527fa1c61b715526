"""Free-list of buffer indices with a monotone top counter.

The heap array holds a permutation-with-history of [0, capacity): slots at
``heap[top:]`` are the free indices, slots below ``top`` are a stale log of
past allocations. ``allocate`` advances the top by a single fetch-and-add
sized to the whole request, so a batch either gets a contiguous block of
free slots or fails atomically.
"""
from __future__ import annotations

import numpy as np


class IndexHeap:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.heap = np.arange(capacity, dtype=np.int32)
        self.top = 0

    @property
    def free_count(self) -> int:
        return self.capacity - self.top

    def allocate(self, count: int) -> np.ndarray:
        """Take ``count`` free indices; raises IndexHeapExhausted if short."""
        if count < 0:
            raise ValueError("count must be >= 0")
        if self.top + count > self.capacity:
            raise IndexHeapExhausted(
                f"requested {count} indices, {self.free_count} free"
            )
        out = self.heap[self.top : self.top + count].copy()
        self.top += count
        return out

    def free(self, indices: np.ndarray) -> None:
        """Return indices to the heap. Freed in ascending order so heap
        state is a pure function of the allocate/free history."""
        indices = np.asarray(indices, dtype=np.int32)
        if indices.size == 0:
            return
        if self.top - indices.size < 0:
            raise ValueError("freeing more indices than were allocated")
        self.heap[self.top - indices.size : self.top] = np.sort(indices)
        self.top -= indices.size

    def free_set(self) -> np.ndarray:
        """Currently free indices (copy)."""
        return self.heap[self.top :].copy()


class IndexHeapExhausted(RuntimeError):
    """No free buffer index left for the requested allocation."""

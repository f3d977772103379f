"""Addressable min-priority queue over faces keyed by update time.

A binary heap with a position map, ordered lexicographically by
(key, face id) so runs are bit-reproducible. Keys may move in either
direction after a neighbour event, so both decrease- and increase-key are
supported through a single update operation.

The heap primitives are numba-compiled module functions operating on flat
arrays; the event engine calls them directly and the IndexedMinQueue class
wraps the same functions for ordinary Python use.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["IndexedMinQueue"]


@njit(cache=True, inline="always")
def _less(keys, f1, f2):
    k1 = keys[f1]
    k2 = keys[f2]
    return k1 < k2 or (k1 == k2 and f1 < f2)


@njit(cache=True)
def _sift_up(heap, pos, keys, i):
    while i > 0:
        parent = (i - 1) >> 1
        if _less(keys, heap[i], heap[parent]):
            heap[i], heap[parent] = heap[parent], heap[i]
            pos[heap[i]] = i
            pos[heap[parent]] = parent
            i = parent
        else:
            break


@njit(cache=True)
def _sift_down(heap, pos, keys, i, size):
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _less(keys, heap[right], heap[child]):
            child = right
        if _less(keys, heap[child], heap[i]):
            heap[i], heap[child] = heap[child], heap[i]
            pos[heap[i]] = i
            pos[heap[child]] = child
            i = child
        else:
            break


@njit(cache=True)
def heap_build(keys):
    """Heapify all face ids 0..K-1; returns (heap, pos)."""
    n = keys.size
    heap = np.arange(n, dtype=np.int64)
    pos = np.arange(n, dtype=np.int64)
    for i in range(n // 2 - 1, -1, -1):
        _sift_down(heap, pos, keys, i, n)
    return heap, pos


@njit(cache=True)
def heap_pop(heap, pos, keys, size):
    """Remove and return the minimum face id; caller decrements size."""
    face = heap[0]
    pos[face] = -1
    last = heap[size - 1]
    if size > 1:
        heap[0] = last
        pos[last] = 0
        _sift_down(heap, pos, keys, 0, size - 1)
    return face


@njit(cache=True)
def heap_push(heap, pos, keys, size, face, key):
    keys[face] = key
    heap[size] = face
    pos[face] = size
    _sift_up(heap, pos, keys, size)


@njit(cache=True)
def heap_update(heap, pos, keys, size, face, key):
    keys[face] = key
    i = pos[face]
    _sift_up(heap, pos, keys, i)
    _sift_down(heap, pos, keys, pos[face], size)


@njit(cache=True)
def heap_remove(heap, pos, keys, size, face):
    """Remove an arbitrary face; caller decrements size."""
    i = pos[face]
    pos[face] = -1
    last = heap[size - 1]
    if i != size - 1:
        heap[i] = last
        pos[last] = i
        _sift_up(heap, pos, keys, i)
        _sift_down(heap, pos, keys, pos[last], size - 1)


class IndexedMinQueue:
    """Min-queue over face ids 0..K-1 with re-keying.

    Ties break on the smaller face id. All stored keys must be finite.
    """

    def __init__(self, keys):
        keys = np.ascontiguousarray(keys, dtype=np.float64)
        if keys.ndim != 1:
            raise ValueError("keys must be a 1-D array, one per face")
        if not np.all(np.isfinite(keys)):
            raise ValueError("keys must be finite")
        self._keys = keys.copy()
        self._heap, self._pos = heap_build(self._keys)
        self._size = int(keys.size)

    def __len__(self) -> int:
        return self._size

    def __contains__(self, face: int) -> bool:
        return 0 <= face < self._pos.size and self._pos[face] >= 0

    def key_of(self, face: int) -> float:
        self._require(face)
        return float(self._keys[face])

    def peek(self) -> tuple[int, float]:
        if self._size == 0:
            raise IndexError("peek from an empty queue")
        face = int(self._heap[0])
        return face, float(self._keys[face])

    def pop_min(self) -> tuple[int, float]:
        if self._size == 0:
            raise IndexError("pop from an empty queue")
        face = int(heap_pop(self._heap, self._pos, self._keys, self._size))
        self._size -= 1
        return face, float(self._keys[face])

    def push(self, face: int, key: float) -> None:
        if face in self:
            raise KeyError(f"face {face} already queued")
        if not (0 <= face < self._pos.size):
            raise KeyError(f"face id {face} out of range")
        heap_push(self._heap, self._pos, self._keys, self._size, face, float(key))
        self._size += 1

    def update_key(self, face: int, key: float) -> None:
        self._require(face)
        heap_update(self._heap, self._pos, self._keys, self._size, face, float(key))

    def remove(self, face: int) -> None:
        self._require(face)
        heap_remove(self._heap, self._pos, self._keys, self._size, face)
        self._size -= 1

    def _require(self, face: int) -> None:
        if not (0 <= face < self._pos.size) or self._pos[face] < 0:
            raise KeyError(f"face {face} not in queue")

    def audit(self) -> None:
        """Raise AssertionError unless heap order and position map hold."""
        n = self._size
        seen = set()
        for i in range(n):
            face = self._heap[i]
            assert self._pos[face] == i, f"position map broken at slot {i}"
            seen.add(int(face))
            if i > 0:
                parent = self._heap[(i - 1) >> 1]
                assert (self._keys[parent], parent) <= (self._keys[face], face), \
                    f"heap order broken at slot {i}"
        absent = set(range(self._pos.size)) - seen
        for face in absent:
            assert self._pos[face] == -1, f"stale position for face {face}"

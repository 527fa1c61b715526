"""Index-first spatial hash map.

The map decouples the collision-resolution structure from storage: keys
and values live in flat preallocated buffers of length ``capacity``, and
the backend only resolves a key to a *buffer index*. Free buffer slots are
dispensed by an :class:`~spatialhash.index_heap.IndexHeap`. Every batch
operation returns parallel ``indices`` and ``masks`` arrays that index
directly into the exposed buffers, so follow-up work (gathering values,
in-place updates) is plain array indexing.

Concurrency contract: batch operations are internally parallel (the
lookup phase is partitioned across ``threads`` workers; commit phases are
single vectorized scatters whose outcome does not depend on the
partitioning). Externally, any number of read-only calls (``find``,
buffer reads) may run concurrently, but a mutating call (``insert``,
``activate``, ``erase``, ``rehash``) requires exclusive access; this is
checked and violations raise :class:`ConcurrentAccessError`.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .backends import first_occurrence_unique, make_backend
from .index_heap import IndexHeap


class CapacityError(RuntimeError):
    """Batch does not fit and automatic rehashing is disabled."""


class ConcurrentAccessError(RuntimeError):
    """A mutating batch overlapped another operation on the same map."""


@dataclass(frozen=True)
class ValueSpec:
    """Shape and dtype of one value buffer entry."""

    shape: tuple[int, ...]
    dtype: np.dtype

    @classmethod
    def coerce(cls, spec) -> "ValueSpec":
        if isinstance(spec, ValueSpec):
            return spec
        if isinstance(spec, tuple) and len(spec) == 2 and isinstance(spec[0], (tuple, list)):
            shape, dtype = spec
            return cls(tuple(int(s) for s in shape), np.dtype(dtype))
        # bare dtype means one scalar element
        return cls((1,), np.dtype(spec))

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "dtype", np.dtype(self.dtype))
        if any(s < 0 for s in self.shape):
            raise ValueError("value shape dimensions must be >= 0")

    @property
    def count(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1

    @property
    def nbytes(self) -> int:
        return self.count * self.dtype.itemsize


@dataclass
class BatchResult:
    """Buffer indices and success masks, parallel to the input batch.

    Where ``masks`` is False the matching index is unspecified and must
    not be used.
    """

    indices: np.ndarray
    masks: np.ndarray

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter((self.indices, self.masks))

    def __len__(self) -> int:
        return len(self.indices)


class _AccessGuard:
    """Checks the reader/writer contract; raises instead of blocking."""

    def __init__(self):
        self._lock = threading.Lock()
        self._readers = 0
        self._writing = False

    @contextmanager
    def reading(self):
        with self._lock:
            if self._writing:
                raise ConcurrentAccessError("read overlapped a mutating batch")
            self._readers += 1
        try:
            yield
        finally:
            with self._lock:
                self._readers -= 1

    @contextmanager
    def writing(self):
        with self._lock:
            if self._writing or self._readers:
                raise ConcurrentAccessError(
                    "mutating batch requires exclusive map access")
            self._writing = True
        try:
            yield
        finally:
            with self._lock:
                self._writing = False


def _missing_winners(keys: np.ndarray, found: np.ndarray) -> np.ndarray:
    """Batch positions that claim a slot: first occurrence of each
    distinct key not already present."""
    if not found.any():
        return np.flatnonzero(first_occurrence_unique(keys))
    miss_pos = np.flatnonzero(~found)
    return miss_pos[first_occurrence_unique(keys[miss_pos])]


def _scatter_rows(dst: np.ndarray, idx: np.ndarray, src: np.ndarray) -> None:
    """Row scatter dispatched by row byte size.

    4/8/12/16-byte rows go through 32-bit word views, larger rows through
    a raw byte view; both are bit-exact copies.
    """
    if idx.size == 0:
        return
    row_bytes = dst.dtype.itemsize * int(np.prod(dst.shape[1:], dtype=np.int64))
    if row_bytes == 0:
        return
    flat_dst = dst.reshape(dst.shape[0], -1)
    flat_src = np.ascontiguousarray(src).reshape(src.shape[0], -1)
    if row_bytes in (4, 8, 12, 16):
        flat_dst.view(np.uint32)[idx] = flat_src.view(np.uint32)
    else:
        flat_dst.view(np.uint8)[idx] = flat_src.view(np.uint8)


class HashMap:
    """Batch-parallel map from fixed-arity int32 keys to value buffers.

    Parameters
    ----------
    capacity:
        Number of buffer slots (and maximum number of stored keys before
        a rehash).
    key_arity:
        Key dimensionality; keys are batches of shape (n, key_arity),
        dtype int32. Floating-point keys are rejected; quantize first.
    value_specs:
        One entry per value buffer: :class:`ValueSpec`, a dtype, or a
        ``(shape, dtype)`` pair. Empty for a hash set.
    backend:
        ``"generic"`` (chains own key copies, one bucket per slot) or
        ``"delegate"`` (chains store bare buffer indices, two buckets per
        slot).
    threads:
        Worker count for the internally parallel lookup phase.
    auto_rehash:
        Grow by doubling when a batch would exceed capacity instead of
        raising :class:`CapacityError`.
    """

    def __init__(self, capacity: int, key_arity: int,
                 value_specs: Sequence = (), backend: str = "generic",
                 threads: int = 1, auto_rehash: bool = True):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if key_arity < 1:
            raise ValueError("key arity must be >= 1")
        self.key_arity = int(key_arity)
        self.value_specs = tuple(ValueSpec.coerce(s) for s in value_specs)
        self.backend_name = ("delegate" if backend in ("delegate", "integer_delegate")
                             else "generic")
        if backend not in ("generic", "delegate", "integer_delegate"):
            raise ValueError(f"unknown backend {backend!r}")
        self.threads = max(1, int(threads))
        self.auto_rehash = bool(auto_rehash)
        self._guard = _AccessGuard()
        self._pool: ThreadPoolExecutor | None = None
        self._debug_checksum = False
        self._init_state(int(capacity))

    # -- state ---------------------------------------------------------

    def _init_state(self, capacity: int) -> None:
        self._capacity = capacity
        self._heap = IndexHeap(capacity)
        self._key_buf = np.zeros((capacity, self.key_arity), dtype=np.int32)
        self._value_bufs = tuple(
            np.zeros((capacity, *spec.shape), dtype=spec.dtype)
            for spec in self.value_specs)
        self._active = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._backend = make_backend(self.backend_name, capacity,
                                     self.key_arity, self._key_buf)

    @property
    def capacity(self) -> int:
        return self._capacity

    @property
    def bucket_count(self) -> int:
        return self._backend.n_buckets

    @property
    def size(self) -> int:
        return self._size

    def __len__(self) -> int:
        return self._size

    @property
    def key_buffer(self) -> np.ndarray:
        """Read-only view of the key buffer; rows at active indices hold
        the stored keys."""
        view = self._key_buf.view()
        view.flags.writeable = False
        return view

    @property
    def value_buffers(self) -> tuple[np.ndarray, ...]:
        """Writable value buffers; writing rows at active indices is the
        supported in-place update path."""
        return self._value_bufs

    def value_buffer(self, i: int = 0) -> np.ndarray:
        return self._value_bufs[i]

    # -- validation ----------------------------------------------------

    def _check_keys(self, keys) -> np.ndarray:
        keys = np.asarray(keys)
        if keys.dtype.kind == "f":
            raise ValueError("floating-point keys are not accepted; "
                             "quantize to int32 first")
        if keys.ndim == 1:
            if self.key_arity == 1:
                keys = keys.reshape(-1, 1)
            elif keys.size == self.key_arity:
                keys = keys.reshape(1, -1)
        if keys.ndim != 2 or keys.shape[1] != self.key_arity:
            raise ValueError(
                f"keys must have shape (n, {self.key_arity}), got {keys.shape}")
        if keys.dtype != np.int32:
            cast = keys.astype(np.int32)
            if np.any(cast != keys):
                raise ValueError("key values do not fit in int32")
            keys = cast
        return np.ascontiguousarray(keys)

    def _check_values(self, m: int, values) -> list[np.ndarray]:
        if len(values) != len(self.value_specs):
            raise ValueError(f"expected {len(self.value_specs)} value "
                             f"batches, got {len(values)}")
        out = []
        for pos, (spec, batch) in enumerate(zip(self.value_specs, values)):
            arr = np.asarray(batch)
            if arr.dtype != spec.dtype:
                arr = arr.astype(spec.dtype)
            if arr.shape[0] != m and not (m == 0 and arr.size == 0):
                raise ValueError(
                    f"value batch {pos} has length {arr.shape[0]}, "
                    f"expected {m}")
            try:
                arr = arr.reshape((m, *spec.shape))
            except ValueError:
                raise ValueError(
                    f"value batch {pos} has shape {arr.shape}, expected "
                    f"(n, {', '.join(map(str, spec.shape))})") from None
            out.append(arr)
        return out

    # -- lookup plumbing -------------------------------------------------

    def _lookup(self, keys, buckets, with_prev=False):
        m = keys.shape[0]
        if self._size == 0:
            # every chain is empty; skip the walk
            entry = np.full(m, -1, dtype=np.int32)
            found = np.zeros(m, dtype=bool)
            return (entry, found, entry.copy()) if with_prev else (entry, found)
        if self.threads == 1 or m < 2048:
            return self._backend.lookup(keys, buckets, with_prev)
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.threads)
        splits = np.array_split(np.arange(m), self.threads)
        futs = [self._pool.submit(self._backend.lookup, keys[s], buckets[s],
                                  with_prev)
                for s in splits if s.size]
        parts = [f.result() for f in futs]
        return tuple(np.concatenate([p[i] for p in parts])
                     for i in range(len(parts[0])))

    # -- growth ----------------------------------------------------------

    def _grown_capacity(self, extra: int) -> int:
        new_cap = self._capacity
        while new_cap - self._size < extra:
            new_cap *= 2
        return new_cap

    def _ensure_free(self, extra: int) -> None:
        if self._heap.free_count >= extra:
            return
        if not self.auto_rehash:
            raise CapacityError(
                f"batch needs {extra} free slots, {self._heap.free_count} "
                f"available at capacity {self._capacity}")
        self._rehash_into(self._grown_capacity(extra))

    def _rehash_into(self, new_capacity: int) -> None:
        act = np.flatnonzero(self._active)
        keys = self._key_buf[act].copy()
        vals = [buf[act].copy() for buf in self._value_bufs]
        self._init_state(new_capacity)
        if keys.shape[0]:
            self._insert_like(keys, vals, association=False)

    # -- operations ------------------------------------------------------

    def insert(self, keys, *values) -> BatchResult:
        """Insert keys with one value batch per value buffer.

        For each distinct key not already present exactly one batch
        position gets ``masks=True`` and a fresh buffer index (the first
        occurrence). Positions holding already-present keys or duplicate
        losers report False, and existing values are never overwritten.
        """
        keys = self._check_keys(keys)
        vals = self._check_values(keys.shape[0], values)
        with self._guard.writing():
            return self._insert_like(keys, vals, association=False)

    def activate(self, keys) -> BatchResult:
        """Ensure keys are present; value buffers stay untouched.

        Key-side effects equal :meth:`insert`. Masks report association:
        a position is True with the key's buffer index if its key was
        already present or if it won the insertion; duplicate losers of
        newly inserted keys report False. Callers initialize values via
        ``result.indices[result.masks]``.
        """
        keys = self._check_keys(keys)
        with self._guard.writing():
            return self._insert_like(keys, None, association=True)

    def _insert_like(self, keys, vals, association: bool) -> BatchResult:
        m = keys.shape[0]
        indices = np.full(m, -1, dtype=np.int32)
        masks = np.zeros(m, dtype=bool)
        if m == 0:
            return BatchResult(indices, masks)

        if self._backend.kind == "delegate":
            # pass 1: copy every candidate key through batch-allocated
            # indices; the buffer must hold size + batch transiently
            self._ensure_free(m)
            all_idx = self._heap.allocate(m)
            self._key_buf[all_idx] = keys
            checksum = self._key_buf.tobytes() if self._debug_checksum else None
            # pass 2: hash with keys frozen in the buffer
            buckets = self._backend.buckets_for(keys)
            entries, found = self._lookup(keys, buckets)
            winners = _missing_winners(keys, found)
            widx = all_idx[winners]
            self._backend.register(keys[winners], buckets[winners], widx)
            if checksum is not None and self._key_buf.tobytes() != checksum:
                raise AssertionError("key buffer mutated during hashing pass")
            # pass 3: commit values for winners, free everything else
            loser_mask = np.ones(m, dtype=bool)
            loser_mask[winners] = False
            self._heap.free(all_idx[loser_mask])
        else:
            while True:
                buckets = self._backend.buckets_for(keys)
                entries, found = self._lookup(keys, buckets)
                winners = _missing_winners(keys, found)
                if self._heap.free_count >= winners.size:
                    break
                # rehash moves every bucket, so replan afterwards
                self._ensure_free(winners.size)
            widx = self._heap.allocate(winners.size)
            self._key_buf[widx] = keys[winners]
            self._backend.register(keys[winners], buckets[winners], widx)

        if vals is not None:
            for buf, batch in zip(self._value_bufs, vals):
                _scatter_rows(buf, widx, batch[winners])
        self._active[widx] = True
        self._size += winners.size

        indices[winners] = widx
        masks[winners] = True
        if association:
            found_pos = np.flatnonzero(found)
            indices[found_pos] = self._backend.buffer_index_of(entries[found_pos])
            masks[found_pos] = True
        return BatchResult(indices, masks)

    def find(self, keys) -> BatchResult:
        """Look up keys; the map is not modified."""
        keys = self._check_keys(keys)
        with self._guard.reading():
            m = keys.shape[0]
            indices = np.full(m, -1, dtype=np.int32)
            masks = np.zeros(m, dtype=bool)
            if m == 0:
                return BatchResult(indices, masks)
            buckets = self._backend.buckets_for(keys)
            entries, found = self._lookup(keys, buckets)
            pos = np.flatnonzero(found)
            indices[pos] = self._backend.buffer_index_of(entries[pos])
            masks[pos] = True
            return BatchResult(indices, masks)

    def erase(self, keys) -> np.ndarray:
        """Remove keys; each present key is removed exactly once.

        Returns a boolean mask with exactly one True per removed key (the
        first batch position holding it).
        """
        keys = self._check_keys(keys)
        with self._guard.writing():
            m = keys.shape[0]
            mask = np.zeros(m, dtype=bool)
            if m == 0:
                return mask
            buckets = self._backend.buckets_for(keys)
            entries, found, prevs = self._lookup(keys, buckets, with_prev=True)
            found_pos = np.flatnonzero(found)
            if found_pos.size == 0:
                return mask
            first_sub = first_occurrence_unique(keys[found_pos])
            hit = found_pos[first_sub]
            bidx = self._backend.buffer_index_of(entries[hit])
            self._backend.unregister(entries[hit], buckets[hit], prevs[hit])
            self._heap.free(bidx)
            self._active[bidx] = False
            self._size -= hit.size
            mask[hit] = True
            return mask

    def active_indices(self) -> np.ndarray:
        """All buffer indices currently holding an entry (ascending)."""
        return np.flatnonzero(self._active).astype(np.int32)

    def rehash(self, new_capacity: int) -> None:
        """Rebuild at the given capacity; content is preserved exactly,
        buffer indices may change and existing buffer views detach."""
        new_capacity = int(new_capacity)
        if new_capacity < 1:
            raise ValueError("capacity must be >= 1")
        if new_capacity < self._size:
            raise ValueError(
                f"new capacity {new_capacity} is below current size {self._size}")
        with self._guard.writing():
            self._rehash_into(new_capacity)

    # -- content helpers -------------------------------------------------

    def items_arrays(self) -> tuple[np.ndarray, ...]:
        """(keys, *values) arrays of all active entries, in ascending
        buffer-index order."""
        act = np.flatnonzero(self._active)
        return (self._key_buf[act].copy(),
                *(buf[act].copy() for buf in self._value_bufs))

    def validate(self) -> None:
        """Check structural invariants; raises AssertionError on breakage."""
        act = np.flatnonzero(self._active)
        free = self._heap.free_set()
        assert act.size == self._size, "size counter vs active flags"
        assert free.size + act.size == self._capacity, "heap conservation"
        both = np.concatenate([act, free])
        assert np.array_equal(np.sort(both), np.arange(self._capacity)), \
            "active/free sets must partition the index range"
        if act.size:
            res = self.find(self._key_buf[act])
            assert bool(res.masks.all()), "stored key failed lookup"
            assert np.array_equal(np.sort(res.indices), np.sort(act)), \
                "lookup resolved to foreign indices"

    def save(self, path, metadata: dict | None = None) -> None:
        from .serialize import save_map
        save_map(self, path, metadata)

    @classmethod
    def load(cls, path, backend: str | None = None, threads: int = 1):
        from .serialize import load_map
        return load_map(path, backend=backend, threads=threads)


class HashSet(HashMap):
    """Hash map without value buffers: stores unique keys only."""

    def __init__(self, capacity: int, key_arity: int, backend: str = "generic",
                 threads: int = 1, auto_rehash: bool = True):
        super().__init__(capacity, key_arity, value_specs=(),
                         backend=backend, threads=threads,
                         auto_rehash=auto_rehash)

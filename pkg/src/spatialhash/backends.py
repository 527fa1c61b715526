"""Separate-chaining backends over preallocated buffers.

Both backends resolve collisions with per-bucket chains stored as arrays
(``heads`` per bucket, ``next`` per entry), so every batch phase is a
vectorized scan instead of a per-key loop:

* ``GenericBackend`` keeps its own entry nodes holding (key copy, buffer
  index) pairs and inserts lazily in one pass: buffer indices are drawn
  from the owner's heap only for keys that actually win a slot.
* ``IntegerDelegateBackend`` stores bare buffer indices as delegate keys;
  the real key bytes live only in the owner's key buffer. Insertion runs
  in three passes (copy all keys, hash read-only keys, commit values and
  free losers) so a chain entry never becomes visible before its key row
  is fully written.

Mutating phases are whole-batch scatters ordered by batch position, which
makes results independent of how the read phase was partitioned across
workers.
"""
from __future__ import annotations

import numpy as np

from .hashing import hash_keys


_MIX64_FINAL = np.uint64(0xD6E8FEB86659FD93)
_GOLDEN64 = 0x9E3779B97F4A7C15


def _mix_rows64(keys: np.ndarray) -> np.ndarray:
    """64-bit row fingerprint; collisions are possible and are resolved
    exactly by the caller."""
    h = np.zeros(keys.shape[0], dtype=np.uint64)
    for d in range(keys.shape[1]):
        mult = np.uint64(((_GOLDEN64 * (2 * d + 1)) | 1) & 0xFFFFFFFFFFFFFFFF)
        col = keys[:, d].astype(np.uint64)
        col += np.uint64(d + 1)
        col *= mult
        col ^= col >> np.uint64(31)
        h ^= col
    h *= _MIX64_FINAL
    h ^= h >> np.uint64(32)
    return h


def _first_unique_sorted(keys: np.ndarray, order: np.ndarray) -> np.ndarray:
    """First-occurrence mask given a stable row sort order."""
    mask = np.zeros(keys.shape[0], dtype=bool)
    sk = keys[order]
    new_group = np.empty(keys.shape[0], dtype=bool)
    new_group[0] = True
    np.any(sk[1:] != sk[:-1], axis=1, out=new_group[1:])
    # stable sort puts the smallest original position first in each group
    mask[order[new_group]] = True
    return mask


def first_occurrence_unique(keys: np.ndarray) -> np.ndarray:
    """Boolean mask marking the first occurrence of each distinct key row.

    Among equal rows the lowest batch position wins, so the result does
    not depend on any partitioning of the batch.
    """
    m = keys.shape[0]
    if m == 0:
        return np.zeros(0, dtype=bool)
    if keys.shape[1] == 1:
        return _first_unique_sorted(keys, np.argsort(keys[:, 0], kind="stable"))
    if m <= 4096:
        return _first_unique_sorted(keys, np.lexsort(keys.T[::-1]))
    # sort by a 64-bit fingerprint: equal keys always share a run, and a
    # run's first row (stable sort) is its own key's first occurrence
    h = _mix_rows64(keys)
    order = np.argsort(h, kind="stable")
    sh = h[order]
    new_run = np.empty(m, dtype=bool)
    new_run[0] = True
    np.not_equal(sh[1:], sh[:-1], out=new_run[1:])
    run_first = np.flatnonzero(new_run)
    mask = np.zeros(m, dtype=bool)
    mask[order[run_first]] = True
    # only rows sharing a fingerprint with another row can be duplicates
    # or collisions; verify those against their run representative
    run_len = np.diff(np.append(run_first, m))
    if int(run_len.max(initial=0)) > 1:
        run_id = np.cumsum(new_run) - 1
        in_long = run_len[run_id] > 1
        rows = order[in_long]
        reps = order[run_first][run_id[in_long]]
        collided = rows[np.any(keys[rows] != keys[reps], axis=1)]
        if collided.size:
            sub = _first_unique_sorted(keys[collided],
                                       np.lexsort(keys[collided].T[::-1]))
            mask[collided[sub]] = True
    return mask


class ChainTable:
    """Bucket heads plus per-entry next pointers; all ops are batch ops."""

    def __init__(self, n_buckets: int, entry_capacity: int):
        self.n_buckets = n_buckets
        self.heads = np.full(n_buckets, -1, dtype=np.int32)
        self.next = np.full(entry_capacity, -1, dtype=np.int32)

    def walk(self, buckets, keys, fetch_keys, with_prev=False):
        """Search each key in its bucket chain.

        Returns (entry, found) int32/bool arrays; entry is -1 where not
        found. With ``with_prev`` also returns each found entry's
        predecessor (-1 when the entry is the chain head). Read-only.
        """
        m = len(buckets)
        entry = np.full(m, -1, dtype=np.int32)
        found = np.zeros(m, dtype=bool)
        prev = np.full(m, -1, dtype=np.int32) if with_prev else None
        cur = self.heads[buckets].astype(np.int32)
        alive = np.flatnonzero(cur >= 0)
        while alive.size:
            e = cur[alive]
            hit = np.all(fetch_keys(e) == keys[alive], axis=1)
            hit_rows = alive[hit]
            entry[hit_rows] = e[hit]
            found[hit_rows] = True
            step = alive[~hit]
            if with_prev:
                prev[step] = cur[step]
            cur[step] = self.next[cur[step]]
            alive = step[cur[step] >= 0]
        if with_prev:
            return entry, found, prev
        return entry, found

    def append(self, entries: np.ndarray, buckets: np.ndarray) -> None:
        """Link new entries at their chains' front, batch order preserved
        within each bucket. Entries must not already be linked."""
        if entries.size == 0:
            return
        order = np.argsort(buckets, kind="stable")
        se = entries[order].astype(np.int32)
        sb = buckets[order]
        last_in_group = np.empty(se.size, dtype=bool)
        last_in_group[-1] = True
        np.not_equal(sb[1:], sb[:-1], out=last_in_group[:-1])
        successor = np.empty(se.size, dtype=np.int32)
        successor[:-1] = se[1:]
        successor[-1] = -1
        self.next[se] = np.where(last_in_group, self.heads[sb], successor)
        first_in_group = np.empty(se.size, dtype=bool)
        first_in_group[0] = True
        first_in_group[1:] = last_in_group[:-1]
        self.heads[sb[first_in_group]] = se[first_in_group]

    def remove(self, entries: np.ndarray, buckets: np.ndarray,
               prevs: np.ndarray) -> None:
        """Unlink entries found by ``walk(..., with_prev=True)``."""
        if entries.size == 0:
            return
        marked = np.zeros(self.next.size, dtype=bool)
        marked[entries] = True

        def resolve(start):
            out = start.copy()
            while True:
                bad = np.flatnonzero((out >= 0) & marked[np.maximum(out, 0)])
                if bad.size == 0:
                    return out
                out[bad] = self.next[out[bad]]

        # successors of removed entries, skipping removed runs
        jump = resolve(self.next[entries])
        live_prev = (prevs >= 0) & ~marked[np.maximum(prevs, 0)]
        affected = np.unique(buckets)
        new_heads = resolve(self.heads[affected])
        self.next[prevs[live_prev]] = jump[live_prev]
        self.heads[affected] = new_heads
        self.next[entries] = -1


class GenericBackend:
    """Chains of (key, buffer index) nodes; node storage owns key copies."""

    kind = "generic"

    def __init__(self, capacity: int, arity: int):
        self.table = ChainTable(n_buckets=capacity, entry_capacity=capacity)
        self.node_keys = np.zeros((capacity, arity), dtype=np.int32)
        self.node_vals = np.full(capacity, -1, dtype=np.int32)
        self._node_free = np.arange(capacity, dtype=np.int32)
        self._node_top = 0

    @property
    def n_buckets(self) -> int:
        return self.table.n_buckets

    def buckets_for(self, keys: np.ndarray) -> np.ndarray:
        return hash_keys(keys, self.n_buckets)

    def lookup(self, keys, buckets, with_prev=False):
        return self.table.walk(buckets, keys, lambda e: self.node_keys[e],
                               with_prev=with_prev)

    def buffer_index_of(self, entries: np.ndarray) -> np.ndarray:
        return self.node_vals[entries]

    def register(self, keys, buckets, buffer_indices) -> None:
        count = len(buffer_indices)
        nodes = self._node_free[self._node_top : self._node_top + count].copy()
        self._node_top += count
        self.node_keys[nodes] = keys
        self.node_vals[nodes] = buffer_indices
        self.table.append(nodes, buckets)

    def unregister(self, entries, buckets, prevs) -> None:
        self.table.remove(entries, buckets, prevs)
        n = entries.size
        self._node_free[self._node_top - n : self._node_top] = np.sort(entries)
        self._node_top -= n
        self.node_vals[entries] = -1


class IntegerDelegateBackend:
    """Chains of bare buffer indices; key bytes live in the owner's buffer.

    Bucket count is twice the capacity (load factor about 0.5).
    """

    kind = "delegate"
    BUCKET_FACTOR = 2

    def __init__(self, capacity: int, arity: int, key_buffer: np.ndarray):
        self.table = ChainTable(n_buckets=self.BUCKET_FACTOR * capacity,
                                entry_capacity=capacity)
        self._key_buffer = key_buffer

    @property
    def n_buckets(self) -> int:
        return self.table.n_buckets

    def buckets_for(self, keys: np.ndarray) -> np.ndarray:
        return hash_keys(keys, self.n_buckets)

    def lookup(self, keys, buckets, with_prev=False):
        return self.table.walk(buckets, keys, lambda e: self._key_buffer[e],
                               with_prev=with_prev)

    def buffer_index_of(self, entries: np.ndarray) -> np.ndarray:
        return entries

    def register(self, keys, buckets, buffer_indices) -> None:
        # keys were already copied to the key buffer in pass 1
        self.table.append(buffer_indices, buckets)

    def unregister(self, entries, buckets, prevs) -> None:
        self.table.remove(entries, buckets, prevs)


def make_backend(tag: str, capacity: int, arity: int, key_buffer: np.ndarray):
    if tag == "generic":
        return GenericBackend(capacity, arity)
    if tag in ("delegate", "integer_delegate"):
        return IntegerDelegateBackend(capacity, arity, key_buffer)
    raise ValueError(f"unknown backend {tag!r}; use 'generic' or 'delegate'")

"""Array-first wrapper over the spatialhash library.

Every operation takes and returns plain contiguous numpy arrays, validates
shapes and dtypes up front with the offending dimension named, and
serializes all calls on a per-handle lock. Buffer views are returned as
copies unless ``zero_copy=True`` is passed. Closed handles raise
:class:`HandleClosedError` instead of touching freed state.
"""
from __future__ import annotations

import threading

import numpy as np

import spatialhash as _native

__version__ = _native.__version__

__all__ = ["HashMap", "HashSet", "HandleClosedError", "voxel_downsample",
           "__version__"]


class HandleClosedError(RuntimeError):
    """The underlying map was released; the handle is no longer usable."""


def _check_keys(keys, arity: int) -> np.ndarray:
    keys = np.asanyarray(keys)
    if keys.dtype.kind not in "iu":
        raise TypeError(
            f"keys dtype must be 32-bit integer, got {keys.dtype}")
    if keys.ndim == 1 and arity == 1:
        keys = keys.reshape(-1, 1)
    if keys.ndim != 2:
        raise ValueError(
            f"keys must be 2-D (n, {arity}), got {keys.ndim}-D array")
    if keys.shape[1] != arity:
        raise ValueError(
            f"keys dimension 1 must be {arity} (key arity), "
            f"got {keys.shape[1]}")
    if keys.dtype != np.int32:
        cast = keys.astype(np.int32)
        if np.any(cast != keys):
            raise ValueError("key values overflow int32")
        keys = cast
    return np.ascontiguousarray(keys)


class HashMap:
    """Handle to a native map; one-to-one batch operations.

    Results come back as ``(indices, masks)`` int32/bool arrays ready for
    advanced indexing into the buffer views.
    """

    def __init__(self, capacity: int, key_arity: int, value_specs=(),
                 backend: str = "generic"):
        self._map = _native.HashMap(capacity, key_arity,
                                    value_specs=value_specs, backend=backend,
                                    threads=1)
        self._lock = threading.Lock()

    # -- handle lifecycle ---------------------------------------------------

    def close(self) -> None:
        with self._lock:
            self._map = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    @property
    def closed(self) -> bool:
        return self._map is None

    def _require(self) -> "_native.HashMap":
        if self._map is None:
            raise HandleClosedError("operation on a closed map handle")
        return self._map

    # -- metadata -------------------------------------------------------------

    @property
    def capacity(self) -> int:
        with self._lock:
            return self._require().capacity

    @property
    def key_arity(self) -> int:
        with self._lock:
            return self._require().key_arity

    def __len__(self) -> int:
        with self._lock:
            return self._require().size

    # -- operations -----------------------------------------------------------

    def insert(self, keys, *values):
        with self._lock:
            m = self._require()
            res = m.insert(_check_keys(keys, m.key_arity), *values)
            return np.array(res.indices), np.array(res.masks)

    def activate(self, keys):
        with self._lock:
            m = self._require()
            res = m.activate(_check_keys(keys, m.key_arity))
            return np.array(res.indices), np.array(res.masks)

    def find(self, keys):
        with self._lock:
            m = self._require()
            res = m.find(_check_keys(keys, m.key_arity))
            return np.array(res.indices), np.array(res.masks)

    def erase(self, keys):
        with self._lock:
            m = self._require()
            return np.array(m.erase(_check_keys(keys, m.key_arity)))

    def active_indices(self):
        with self._lock:
            return np.array(self._require().active_indices())

    def rehash(self, new_capacity: int) -> None:
        with self._lock:
            self._require().rehash(new_capacity)

    # -- buffers ----------------------------------------------------------------

    def key_buffer(self, zero_copy: bool = False):
        """Stored keys by buffer index; always read-only."""
        with self._lock:
            buf = self._require().key_buffer
            return buf if zero_copy else buf.copy()

    def value_buffer(self, i: int = 0, zero_copy: bool = False):
        """Value buffer ``i``; a copy unless ``zero_copy``, in which case
        writes update the map in place (and a rehash detaches the view)."""
        with self._lock:
            buf = self._require().value_buffer(i)
            return buf if zero_copy else buf.copy()

    def scatter_values(self, i: int, indices, values) -> None:
        """Write rows of value buffer ``i`` at the given buffer indices."""
        with self._lock:
            self._require().value_buffer(i)[np.asarray(indices)] = values


class HashSet(HashMap):
    """Keys only; insert/find/erase semantics match the map."""

    def __init__(self, capacity: int, key_arity: int,
                 backend: str = "generic"):
        super().__init__(capacity, key_arity, value_specs=(), backend=backend)


def voxel_downsample(points, voxel_size: float):
    """One representative point index per occupied voxel.

    Returns ``(voxel_coords, selected_indices)`` as plain arrays; see the
    native library for the representative-choice contract.
    """
    points = np.asanyarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be 2-D (n, 3), got {points.ndim}-D")
    if points.shape[1] != 3:
        raise ValueError(
            f"points dimension 1 must be 3, got {points.shape[1]}")
    coords, selected = _native.voxel_downsample(points, voxel_size, threads=1)
    return np.array(coords), np.array(selected)

"""Batch geometry primitives built on the map interface.

Quantization uses floor (round toward -inf) everywhere: a point p belongs
to cell ``floor(p / s)``, also for negative coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .hashmap import BatchResult, HashMap, HashSet


@dataclass
class PointCloud:
    """Positions in meters plus optional per-point attributes."""

    positions: np.ndarray
    colors: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        for name in ("colors", "normals"):
            attr = getattr(self, name)
            if attr is not None:
                attr = np.atleast_2d(np.asarray(attr))
                if attr.shape[0] != n:
                    attr = attr.reshape(n, -1) if attr.size else \
                        attr.reshape(n, attr.shape[-1])
                if attr.shape[0] != n:
                    raise ValueError(f"{name} length {attr.shape[0]} != {n} points")
                setattr(self, name, attr)

    def __len__(self) -> int:
        return len(self.positions)

    def select(self, idx: np.ndarray) -> "PointCloud":
        """Gather a sub-cloud; attributes follow the same indices."""
        return PointCloud(
            self.positions[idx],
            None if self.colors is None else self.colors[idx],
            None if self.normals is None else self.normals[idx])


def quantize(positions: np.ndarray, cell: float) -> np.ndarray:
    """floor(p / cell) as int32 voxel coordinates."""
    if cell <= 0:
        raise ValueError("cell size must be > 0")
    coords = np.floor(np.asarray(positions, dtype=np.float64) / cell)
    if coords.size and (coords.min() < -(2 ** 31) or coords.max() >= 2 ** 31):
        raise ValueError("quantized coordinates exceed int32 range")
    return coords.astype(np.int32)


def voxel_downsample(points, voxel_size: float, backend: str = "generic",
                     threads: int = 1):
    """Keep one representative point per occupied voxel.

    Returns ``(voxel_coords, selected)``: the distinct voxel coordinates
    and the index of the representative input point for each, parallel
    arrays in first-occurrence order. Which co-voxel point represents a
    voxel is unspecified. Gather attributes with ``points.select(selected)``.
    """
    positions = points.positions if isinstance(points, PointCloud) else \
        np.asarray(points, dtype=np.float64).reshape(-1, 3)
    coords = quantize(positions, voxel_size)
    if len(coords) == 0:
        return coords, np.zeros(0, dtype=np.int64)
    dedup = HashSet(len(coords), 3, backend=backend, threads=threads)
    res = dedup.insert(coords)
    selected = np.flatnonzero(res.masks)
    return coords[selected], selected


def lattice_offsets(r: int) -> np.ndarray:
    """All (2r+1)^3 offsets in [-r, r]^3, lexicographic order, center
    included."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    return np.array(list(product(range(-r, r + 1), repeat=3)), dtype=np.int32)


def radius_neighbors(hashmap: HashMap, coords, r: int = 1) -> BatchResult:
    """Query every lattice offset in [-r, r]^3 around each coordinate.

    Returns a BatchResult whose ``indices`` and ``masks`` have shape
    (n, (2r+1)^3); column j corresponds to ``lattice_offsets(r)[j]``.
    ``r=0`` is exactly ``find``.
    """
    coords = np.asarray(coords, dtype=np.int32).reshape(-1, 3)
    offs = lattice_offsets(r)
    n, k = len(coords), len(offs)
    queries = (coords[:, None, :] + offs[None, :, :]).reshape(n * k, 3)
    res = hashmap.find(queries)
    return BatchResult(res.indices.reshape(n, k), res.masks.reshape(n, k))


_CUBE_CORNERS = np.array(list(product((0, 1), repeat=3)), dtype=np.int32)


def cube_embed(points, grid_spacing: float):
    """Enclosing-cell corners and trilinear weights for each point.

    Returns ``(corners, weights)`` of shapes (n, 8, 3) int32 and (n, 8)
    float64; corner j is the cell base plus ``(0,1)^3`` offset j in
    lexicographic order. Weights are non-negative and sum to 1; the
    weighted corner positions reconstruct the point.
    """
    positions = points.positions if isinstance(points, PointCloud) else \
        np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if grid_spacing <= 0:
        raise ValueError("grid spacing must be > 0")
    scaled = positions / grid_spacing
    base = np.floor(scaled)
    frac = scaled - base
    if base.size and (base.min() < -(2 ** 31) or base.max() >= 2 ** 31):
        raise ValueError("grid coordinates exceed int32 range")
    corners = base.astype(np.int32)[:, None, :] + _CUBE_CORNERS[None, :, :]
    axis_w = np.where(_CUBE_CORNERS[None, :, :] == 1,
                      frac[:, None, :], 1.0 - frac[:, None, :])
    weights = axis_w.prod(axis=2)
    return corners, weights


def set_intersection(keys_a, keys_b, backend: str = "generic",
                     threads: int = 1) -> np.ndarray:
    """Rows of ``keys_b`` whose value occurs in ``keys_a``; duplicates in
    ``keys_b`` are preserved."""
    keys_a = np.atleast_2d(np.asarray(keys_a, dtype=np.int32))
    keys_b = np.atleast_2d(np.asarray(keys_b, dtype=np.int32))
    if len(keys_a) == 0 or len(keys_b) == 0:
        return keys_b[:0]
    if keys_a.shape[1] != keys_b.shape[1]:
        raise ValueError("key arity mismatch between the two sets")
    probe = HashSet(len(keys_a), keys_a.shape[1], backend=backend,
                    threads=threads)
    probe.insert(keys_a)
    res = probe.find(keys_b)
    return keys_b[res.masks]

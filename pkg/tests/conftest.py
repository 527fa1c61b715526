"""Shared oracles: deliberately naive sequential reference implementations
that the vectorized library is checked against."""
from __future__ import annotations

import numpy as np
import pytest


class SequentialMap:
    """Plain-dict reference for map content; keys are tuples."""

    def __init__(self):
        self.data: dict[tuple, tuple] = {}

    def insert(self, keys, *value_batches):
        inserted = np.zeros(len(keys), dtype=bool)
        for j, key in enumerate(map(tuple, np.asarray(keys))):
            if key not in self.data:
                self.data[key] = tuple(np.asarray(v[j]).copy()
                                       for v in value_batches)
                inserted[j] = True
        return inserted

    def erase(self, keys):
        removed = np.zeros(len(keys), dtype=bool)
        for j, key in enumerate(map(tuple, np.asarray(keys))):
            if key in self.data:
                del self.data[key]
                removed[j] = True
        return removed

    def find(self, keys):
        return np.array([tuple(k) in self.data for k in np.asarray(keys)])

    def __len__(self):
        return len(self.data)


def content_of(hashmap) -> dict:
    """key tuple -> tuple of value rows, read straight from the buffers."""
    keys, *values = hashmap.items_arrays()
    out = {}
    for j, key in enumerate(map(tuple, keys)):
        out[key] = tuple(np.asarray(v[j]).copy() for v in values)
    return out


def assert_same_content(hashmap, reference: SequentialMap | dict):
    ref = reference.data if isinstance(reference, SequentialMap) else reference
    got = content_of(hashmap)
    assert set(got) == set(ref), (
        f"key sets differ: {len(got)} stored vs {len(ref)} expected")
    for key, vals in got.items():
        for mine, theirs in zip(vals, ref[key]):
            assert np.array_equal(np.asarray(mine).ravel(),
                                  np.asarray(theirs).ravel()), f"value at {key}"


def assert_maps_equal(map_a, map_b):
    ca, cb = content_of(map_a), content_of(map_b)
    assert set(ca) == set(cb)
    for key in ca:
        for va, vb in zip(ca[key], cb[key]):
            assert np.array_equal(va, vb), f"value mismatch at {key}"


def mesh_edge_counts(triangles: np.ndarray):
    """Occurrences of each undirected edge across all triangles."""
    tri = np.asarray(triangles)
    edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return counts


def voxel_set_oracle(points: np.ndarray, s: float) -> set[tuple]:
    out = set()
    for p in np.asarray(points, dtype=np.float64):
        out.add((int(np.floor(p[0] / s)), int(np.floor(p[1] / s)),
                 int(np.floor(p[2] / s))))
    return out


def allocation_oracle(frame, config) -> set[tuple]:
    """Per-pixel loop rasterizing the ray-band allocation rule."""
    intr = frame.intrinsics
    bs = config.block_size
    step = bs / 2
    n_steps = int(np.ceil(2 * config.trunc / step)) + 1
    offsets = np.minimum(np.arange(n_steps) * step, 2 * config.trunc)
    rot, trans = frame.pose[:3, :3], frame.pose[:3, 3]
    blocks = set()
    for v in range(intr.height):
        for u in range(intr.width):
            z = frame.depth[v, u]
            if z <= 0 or z < frame.depth_min or z > frame.depth_max:
                continue
            ray = np.array([(u - intr.cx) / intr.fx,
                            (v - intr.cy) / intr.fy, 1.0])
            for t in offsets:
                depth = max(z - config.trunc + t, 1e-6)
                world = rot @ (ray * depth) + trans
                blocks.add(tuple(int(np.floor(c / bs)) for c in world))
    return blocks


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

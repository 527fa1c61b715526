"""Volumetric ray marching over the voxel block grid.

Rays march from a per-pixel near bound (projected from the active block
corners) toward a far bound. At each step the voxel under the ray is
queried: where the sample is invalid the ray advances a whole block; where
it is valid and positive it advances by the sampled distance; a sign
change from positive to non-positive marks the surface and the crossing is
refined with one linear interpolation between the last two samples.
"""
from __future__ import annotations

import numpy as np

from .grid import VoxelBlockGrid, block_of
from .types import Intrinsics

_RANGE_TILE = 8


def sample_tsdf(grid: VoxelBlockGrid, points: np.ndarray,
                use_local: bool = False):
    """Nearest-voxel (distance, valid) at world points.

    ``use_local`` queries the current frame's local map and redirects the
    hit into the global buffers; points whose block is outside the frame
    are invalid in that mode.
    """
    cfg = grid.config
    l = cfg.block_resolution
    blocks = block_of(points, cfg)
    if use_local:
        if grid.local_map is None:
            raise ValueError("no local map; run allocate_blocks first")
        li, lmask = grid.local_map.find(blocks)
        gidx = np.where(lmask, grid.local_map.value_buffer(0)[li, 0], -1)
        found = lmask
    else:
        gidx, found = grid.global_map.find(blocks)
    voxel = np.floor(points / cfg.voxel_size).astype(np.int64) - \
        blocks.astype(np.int64) * l
    np.clip(voxel, 0, l - 1, out=voxel)
    d = np.zeros(len(points), dtype=np.float32)
    w = np.zeros(len(points), dtype=np.float32)
    pos = np.flatnonzero(found)
    if pos.size:
        payload = grid.global_map.value_buffer(0)
        vx, vy, vz = voxel[pos, 0], voxel[pos, 1], voxel[pos, 2]
        cell = payload[gidx[pos], vx, vy, vz]
        d[pos] = cell[:, 0]
        w[pos] = cell[:, 1]
    return d, found & (w > 0)


def _range_bounds(grid: VoxelBlockGrid, intrinsics: Intrinsics,
                  pose: np.ndarray):
    """Per-pixel [near, far] camera-z bounds from active block corners,
    splatted on a coarse tile grid."""
    cfg = grid.config
    idx = grid.active_block_indices()
    h_t = -(-intrinsics.height // _RANGE_TILE)
    w_t = -(-intrinsics.width // _RANGE_TILE)
    near = np.full((h_t, w_t), np.inf, dtype=np.float64)
    far = np.zeros((h_t, w_t), dtype=np.float64)
    if idx.size == 0:
        return near, far
    keys = grid.block_keys(idx).astype(np.float64)
    corner_off = np.array([[i, j, k] for i in (0, 1) for j in (0, 1)
                           for k in (0, 1)], dtype=np.float64)
    corners = (keys[:, None, :] + corner_off[None]) * cfg.block_size
    inv = np.eye(4)
    rot = pose[:3, :3]
    inv[:3, :3] = rot.T
    inv[:3, 3] = -rot.T @ pose[:3, 3]
    cam = corners.reshape(-1, 3) @ inv[:3, :3].T + inv[:3, 3]
    cam = cam.reshape(-1, 8, 3)
    u, v, z = intrinsics.project(cam)
    ahead = z > 1e-6
    for b in np.flatnonzero(ahead.any(axis=1)):
        sel = ahead[b]
        u0 = int(np.clip(np.floor(u[b, sel].min() / _RANGE_TILE), 0, w_t - 1))
        u1 = int(np.clip(np.ceil(u[b, sel].max() / _RANGE_TILE), 0, w_t - 1))
        v0 = int(np.clip(np.floor(v[b, sel].min() / _RANGE_TILE), 0, h_t - 1))
        v1 = int(np.clip(np.ceil(v[b, sel].max() / _RANGE_TILE), 0, h_t - 1))
        zmin, zmax = z[b, sel].min(), z[b, sel].max()
        tile_n = near[v0 : v1 + 1, u0 : u1 + 1]
        tile_f = far[v0 : v1 + 1, u0 : u1 + 1]
        np.minimum(tile_n, zmin, out=tile_n)
        np.maximum(tile_f, zmax, out=tile_f)
    return near, far


def raycast(grid: VoxelBlockGrid, intrinsics: Intrinsics, pose: np.ndarray,
            mode: str = "global", max_steps: int = 256):
    """Render a depth image from the given camera.

    Returns ``(depth, mask)``: camera-frame z per pixel (0 where no
    surface was hit) and the hit mask. ``mode="local"`` restricts block
    queries to the current frame's local map.
    """
    if mode not in ("global", "local"):
        raise ValueError("mode must be 'global' or 'local'")
    use_local = mode == "local"
    cfg = grid.config
    h, w = intrinsics.height, intrinsics.width
    depth = np.zeros((h, w), dtype=np.float32)
    if grid.block_count == 0:
        return depth, np.zeros((h, w), dtype=bool)

    near, far = _range_bounds(grid, intrinsics, pose)
    uu, vv = np.meshgrid(np.arange(w), np.arange(h))
    dirs_cam = intrinsics.unproject(uu.ravel(), vv.ravel(), 1.0)
    slope = np.linalg.norm(dirs_cam, axis=1)  # t along unit ray per unit z
    rot, origin = pose[:3, :3], pose[:3, 3]
    dirs = (dirs_cam / slope[:, None]) @ rot.T

    tile_near = near[vv.ravel() // _RANGE_TILE, uu.ravel() // _RANGE_TILE]
    tile_far = far[vv.ravel() // _RANGE_TILE, uu.ravel() // _RANGE_TILE]
    live = np.flatnonzero(np.isfinite(tile_near) & (tile_far > 0))
    if live.size == 0:
        return depth, np.zeros((h, w), dtype=bool)

    # march in ray-length t; convert the camera-z bounds through the slope
    t = np.maximum((tile_near[live] - cfg.block_size) * slope[live], 0.0)
    t_far = (tile_far[live] + cfg.block_size) * slope[live]
    d_prev = np.zeros(live.size, dtype=np.float32)
    t_prev = np.zeros_like(t)
    has_prev = np.zeros(live.size, dtype=bool)
    t_hit = np.full(live.size, -1.0)

    active = np.arange(live.size)
    for _ in range(max_steps):
        if active.size == 0:
            break
        pos = origin + dirs[live[active]] * t[active][:, None]
        d, valid = sample_tsdf(grid, pos, use_local=use_local)

        crossed = valid & has_prev[active] & (d_prev[active] > 0) & (d <= 0)
        if crossed.any():
            rows = active[crossed]
            dp = d_prev[rows].astype(np.float64)
            dc = d[crossed].astype(np.float64)
            frac = dp / np.maximum(dp - dc, 1e-12)
            t_hit[rows] = t_prev[rows] + frac * (t[rows] - t_prev[rows])

        step = np.where(valid, np.maximum(d, cfg.voxel_size / 2),
                        cfg.block_size).astype(np.float64)
        keep = ~crossed
        rows = active[keep]
        t_prev[rows] = t[rows]
        d_prev[rows] = d[keep]
        has_prev[rows] = valid[keep]
        t[rows] = t[rows] + step[keep]
        active = rows[t[rows] <= t_far[rows]]

    hit = t_hit > 0
    flat_rows = live[hit]
    depth.ravel()[flat_rows] = (t_hit[hit] / slope[flat_rows]).astype(np.float32)
    mask = np.zeros(h * w, dtype=bool)
    mask[flat_rows] = True
    return depth, mask.reshape(h, w)

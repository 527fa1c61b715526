"""Synthetic depth frames and analytically filled volumes.

Everything here is deterministic, so pipelines built on these inputs can
be checked against closed-form geometry.
"""
from __future__ import annotations

import numpy as np

from .grid import VoxelBlockGrid
from .types import Frame, Intrinsics, TsdfConfig

DEFAULT_INTRINSICS = Intrinsics(fx=250.0, fy=250.0, cx=159.5, cy=119.5,
                                width=320, height=240)


def plane_depth(intrinsics: Intrinsics, z: float = 1.0) -> np.ndarray:
    """Depth image of a fronto-parallel plane at camera-frame depth z."""
    return np.full((intrinsics.height, intrinsics.width), float(z))


def sphere_depth(intrinsics: Intrinsics, center=(0.0, 0.0, 1.0),
                 radius: float = 0.3) -> np.ndarray:
    """Depth image of a sphere; pixels that miss it read 0 (invalid)."""
    h, w = intrinsics.height, intrinsics.width
    uu, vv = np.meshgrid(np.arange(w), np.arange(h))
    dirs = intrinsics.unproject(uu.ravel(), vv.ravel(), 1.0)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    c = np.asarray(center, dtype=np.float64)
    b = dirs @ c
    disc = b * b - (c @ c - radius * radius)
    hit = disc >= 0
    t = np.where(hit, b - np.sqrt(np.maximum(disc, 0.0)), 0.0)
    hit &= t > 0
    depth = np.where(hit, t * dirs[:, 2], 0.0)
    return depth.reshape(h, w)


def make_frames(shape: str, n_frames: int = 10,
                intrinsics: Intrinsics | None = None,
                depth_min: float = 0.2, depth_max: float = 3.0,
                plane_z: float = 1.0, sphere_center=(0.0, 0.0, 1.0),
                sphere_radius: float = 0.3) -> list[Frame]:
    """Identity-pose frames observing a plane or a sphere."""
    intr = intrinsics or DEFAULT_INTRINSICS
    if shape == "plane":
        depth = plane_depth(intr, plane_z)
    elif shape == "sphere":
        depth = sphere_depth(intr, sphere_center, sphere_radius)
    else:
        raise ValueError(f"unknown synthetic shape {shape!r}")
    return [Frame(depth.copy(), intr, np.eye(4), depth_min, depth_max)
            for _ in range(n_frames)]


def _candidate_block_range(lo, hi, config: TsdfConfig):
    lo_b = np.floor(np.asarray(lo) / config.block_size).astype(int)
    hi_b = np.floor(np.asarray(hi) / config.block_size).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo_b, hi_b)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1).astype(np.int32)


def _fill_analytic(grid: VoxelBlockGrid, blocks: np.ndarray, sdf) -> None:
    """Activate blocks and write clamped signed distances with weight 1."""
    cfg = grid.config
    l = cfg.block_resolution
    res = grid.global_map.activate(blocks)
    idx = res.indices[res.masks]
    coords = blocks[res.masks]
    offs = np.stack(np.meshgrid(np.arange(l), np.arange(l), np.arange(l),
                                indexing="ij"), axis=-1).reshape(-1, 3)
    payload = grid.global_map.value_buffer(0)
    for start in range(0, len(idx), 512):
        bi = idx[start : start + 512]
        bc = coords[start : start + 512].astype(np.float64)
        pts = (bc[:, None, :] * l + offs[None]) * cfg.voxel_size
        d = np.clip(sdf(pts.reshape(-1, 3)), -cfg.trunc, cfg.trunc)
        chunk = np.empty((len(bi), l * l * l, 2), np.float32)
        chunk[..., 0] = d.reshape(len(bi), -1)
        chunk[..., 1] = 1.0
        payload[bi] = chunk.reshape(len(bi), l, l, l, 2)


def fill_sphere_volume(config: TsdfConfig | None = None, radius: float = 0.5,
                       center=(0.0, 0.0, 0.0),
                       band: float | None = None) -> VoxelBlockGrid:
    """Volume holding the exact clamped distance field of a sphere.

    Only blocks whose AABB intersects the shell |dist - radius| <= band
    are activated, so the zero crossing is fully enclosed by weighted
    voxels.
    """
    cfg = config or TsdfConfig(voxel_size=0.01, trunc=0.03)
    band = cfg.trunc if band is None else band
    c = np.asarray(center, dtype=np.float64)
    margin = band + cfg.block_size
    cand = _candidate_block_range(c - radius - margin, c + radius + margin, cfg)
    lo = cand.astype(np.float64) * cfg.block_size
    hi = lo + cfg.block_size
    nearest = np.clip(c, lo, hi)
    d_near = np.linalg.norm(nearest - c, axis=1)
    far = np.where(np.abs(lo - c) > np.abs(hi - c), lo, hi)
    d_far = np.linalg.norm(far - c, axis=1)
    keep = (d_near <= radius + band) & (d_far >= radius - band)
    blocks = cand[keep]

    grid = VoxelBlockGrid(cfg, capacity=max(len(blocks), 1))
    _fill_analytic(grid, blocks,
                   lambda p: np.linalg.norm(p - c, axis=1) - radius)
    return grid


def fill_plane_volume(config: TsdfConfig | None = None, z: float = 1.0,
                      extent: float = 1.0,
                      band: float | None = None) -> VoxelBlockGrid:
    """Volume holding the exact clamped distance field of the plane
    ``z = const`` over a square x/y extent."""
    cfg = config or TsdfConfig()
    band = cfg.trunc if band is None else band
    lo = (-extent, -extent, z - band - cfg.block_size)
    hi = (extent, extent, z + band + cfg.block_size)
    cand = _candidate_block_range(lo, hi, cfg)
    z_lo = cand[:, 2].astype(np.float64) * cfg.block_size
    keep = (z_lo <= z + band) & (z_lo + cfg.block_size >= z - band)
    blocks = cand[keep]

    grid = VoxelBlockGrid(cfg, capacity=max(len(blocks), 1))
    _fill_analytic(grid, blocks, lambda p: z - p[:, 2])
    return grid

"""Spatially hashed voxel block grid.

A persistent *global* map keys block coordinates to dense (l, l, l, 2)
float32 payloads holding (signed distance, weight) per voxel, optionally
plus an (l, l, l, 3) color payload. Per frame, a throwaway *local* map
dedups the frame's candidate block coordinates down from raw-pixel scale
before the global map is touched, and afterwards stores each coordinate's
global buffer index so frame-scoped queries can be redirected into the
global buffers.

Voxel (block B, local v) samples the field at world position
``(B * l + v) * voxel_size``; world points decompose per
:func:`block_of` / :func:`voxel_of` with floor quantization.
"""
from __future__ import annotations

import numpy as np

from ..geometry import lattice_offsets
from ..hashmap import HashMap, ValueSpec
from .types import Frame, TsdfConfig


def block_of(points: np.ndarray, config: TsdfConfig) -> np.ndarray:
    """Block coordinate floor(x / (s*l)) per point."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return np.floor(pts / config.block_size).astype(np.int32)


def voxel_of(points: np.ndarray, blocks: np.ndarray,
             config: TsdfConfig) -> np.ndarray:
    """Local voxel index floor((x - B*s*l) / s), each component in [0, l)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rel = pts - blocks.astype(np.float64) * config.block_size
    v = np.floor(rel / config.voxel_size).astype(np.int32)
    # guard the numerical edge where x sits on a block boundary
    return np.clip(v, 0, config.block_resolution - 1)


class VoxelBlockGrid:
    """TSDF volume over hashed voxel blocks.

    ``allocation`` picks how depth samples claim blocks: ``"ray"``
    activates every block the view ray crosses within one truncation band
    of the observed surface (fast mode), ``"neighbor"`` activates the
    surface block plus its full 1-radius neighborhood (complete mode).
    """

    def __init__(self, config: TsdfConfig | None = None,
                 capacity: int = 10000, allocation: str = "ray",
                 with_color: bool = False, backend: str = "generic",
                 threads: int = 1):
        if allocation not in ("ray", "neighbor"):
            raise ValueError("allocation must be 'ray' or 'neighbor'")
        self.config = config or TsdfConfig()
        self.allocation = allocation
        self.with_color = bool(with_color)
        self.threads = threads
        l = self.config.block_resolution
        specs = [ValueSpec((l, l, l, 2), np.float32)]
        if self.with_color:
            specs.append(ValueSpec((l, l, l, 3), np.float32))
        self.global_map = HashMap(capacity, 3, value_specs=specs,
                                  backend=backend, threads=threads)
        # per-frame map: block coordinate -> global buffer index
        self.local_map: HashMap | None = None
        self._local_indices: np.ndarray | None = None

    # -- convenience views ------------------------------------------------

    @property
    def tsdf(self) -> np.ndarray:
        """(capacity, l, l, l) signed-distance channel, writable view."""
        return self.global_map.value_buffer(0)[..., 0]

    @property
    def weight(self) -> np.ndarray:
        return self.global_map.value_buffer(0)[..., 1]

    @property
    def color(self) -> np.ndarray:
        if not self.with_color:
            raise ValueError("grid was built without color")
        return self.global_map.value_buffer(1)

    @property
    def block_count(self) -> int:
        return self.global_map.size

    def block_keys(self, indices: np.ndarray) -> np.ndarray:
        return self.global_map.key_buffer[indices]

    def active_block_indices(self) -> np.ndarray:
        return self.global_map.active_indices()

    # -- allocation --------------------------------------------------------

    def _candidate_blocks(self, frame: Frame) -> np.ndarray:
        """Block coordinates claimed by the frame's valid depth samples."""
        cfg = self.config
        valid = frame.valid_mask()
        v_px, u_px = np.nonzero(valid)
        if v_px.size == 0:
            return np.zeros((0, 3), dtype=np.int32)
        z = frame.depth[v_px, u_px]
        rays = frame.intrinsics.unproject(u_px, v_px, 1.0)  # z=1 slopes
        rot, trans = frame.pose[:3, :3], frame.pose[:3, 3]

        if self.allocation == "neighbor":
            surf = rays * z[:, None]
            world = surf @ rot.T + trans
            blocks = block_of(world, cfg)
            offs = lattice_offsets(1)
            return (blocks[:, None, :] + offs[None, :, :]).reshape(-1, 3)

        # ray mode: sample the ray segment within +-trunc of the surface
        # at half-block spacing, endpoints included
        ray_norm = np.linalg.norm(rays, axis=1)
        step = cfg.block_size / 2
        n_steps = int(np.ceil(2 * cfg.trunc / step)) + 1
        t = np.minimum(np.arange(n_steps) * step, 2 * cfg.trunc)
        depths = np.maximum(z[:, None] - cfg.trunc + t[None, :], 1e-6)
        pts = rays[:, None, :] * depths[..., None]  # camera frame
        world = pts.reshape(-1, 3) @ rot.T + trans
        return block_of(world, cfg)

    def allocate_blocks(self, frame: Frame) -> np.ndarray:
        """Activate the frame's blocks through the double-map scheme.

        Candidate coordinates are deduped in a fresh local map, the
        survivors are activated in the global map, and each local entry
        stores its coordinate's global buffer index. Returns the global
        buffer indices of this frame's blocks.
        """
        coords = self._candidate_blocks(frame)
        if len(coords) == 0:
            self.local_map = None
            self._local_indices = None
            return np.zeros(0, dtype=np.int32)
        local = HashMap(len(coords), 3, value_specs=[np.int32],
                        threads=self.threads)
        li, lmask = local.activate(coords)
        survivors = coords[lmask]
        self.global_map.activate(survivors)
        gi, gmask = self.global_map.find(survivors)
        assert bool(gmask.all())
        local.value_buffer(0)[li[lmask], 0] = gi
        self.local_map = local
        self._local_indices = gi
        return gi

    # -- integration ---------------------------------------------------------

    def integrate(self, frame: Frame,
                  block_indices: np.ndarray | None = None,
                  colors: np.ndarray | None = None,
                  chunk_blocks: int = 1024) -> None:
        """Fuse one frame into the given blocks (default: the blocks
        returned by the latest :meth:`allocate_blocks`).

        Per voxel: project into the frame, read the depth sample, form the
        projective signed distance (depth minus camera-frame z), skip
        anything more than one truncation behind the surface, and fold the
        clamped distance into the weighted running mean, capping the
        accumulated weight.
        """
        cfg = self.config
        if colors is not None and not self.with_color:
            raise ValueError("grid was built without color")
        if block_indices is None:
            block_indices = self._local_indices
        if block_indices is None or len(block_indices) == 0:
            return
        l = cfg.block_resolution
        offs = np.stack(np.meshgrid(np.arange(l), np.arange(l), np.arange(l),
                                    indexing="ij"), axis=-1).reshape(-1, 3)
        pose_inv = frame.pose_inv
        rot, trans = pose_inv[:3, :3], pose_inv[:3, 3]
        intr = frame.intrinsics
        payload = self.global_map.value_buffer(0)
        color_buf = self.global_map.value_buffer(1) if colors is not None else None

        for start in range(0, len(block_indices), chunk_blocks):
            idx = block_indices[start : start + chunk_blocks]
            keys = self.global_map.key_buffer[idx].astype(np.float64)
            world = (keys[:, None, :] * l + offs[None, :, :]) * cfg.voxel_size
            cam = world @ rot.T + trans
            u, v, r = intr.project(cam)
            u_px = np.round(u).astype(np.int64)
            v_px = np.round(v).astype(np.int64)
            ok = (r > 0) & (u_px >= 0) & (u_px < intr.width) & \
                 (v_px >= 0) & (v_px < intr.height)
            du = np.zeros_like(r)
            du[ok] = frame.depth[v_px[ok], u_px[ok]]
            ok &= (du > 0) & (du >= frame.depth_min) & (du <= frame.depth_max)
            sd = du - r
            ok &= sd >= -cfg.trunc
            if not ok.any():
                continue
            psi = np.clip(sd, -cfg.trunc, cfg.trunc).astype(np.float32)

            block = payload[idx].reshape(len(idx), -1, 2)
            d, w = block[..., 0], block[..., 1]
            wj = np.float32(cfg.frame_weight)
            w_sum = w + wj
            d_new = np.where(ok, (w * d + wj * psi) / w_sum, d)
            if color_buf is not None:
                cblock = color_buf[idx].reshape(len(idx), -1, 3)
                cj = np.zeros(cblock.shape, np.float32)
                cj[ok] = colors[v_px[ok], u_px[ok]]
                c_new = np.where(ok[..., None],
                                 (w[..., None] * cblock + wj * cj) / w_sum[..., None],
                                 cblock)
                color_buf[idx] = c_new.reshape(len(idx), l, l, l, 3)
            block[..., 0] = d_new
            block[..., 1] = np.where(ok, np.minimum(w_sum, cfg.weight_max), w)
            payload[idx] = block.reshape(len(idx), l, l, l, 2)

    def integrate_frame(self, frame: Frame,
                        colors: np.ndarray | None = None) -> np.ndarray:
        """Allocate then integrate; returns the frame's block indices."""
        idx = self.allocate_blocks(frame)
        self.integrate(frame, idx, colors=colors)
        return idx

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "kind": "voxel_block_grid",
            "voxel_size": self.config.voxel_size,
            "block_resolution": self.config.block_resolution,
            "trunc": self.config.trunc,
            "frame_weight": self.config.frame_weight,
            "weight_max": self.config.weight_max,
            "allocation": self.allocation,
            "with_color": self.with_color,
        }
        self.global_map.save(path, metadata=meta)

    @classmethod
    def load(cls, path, threads: int = 1) -> "VoxelBlockGrid":
        loaded, meta = HashMap.load(path, threads=threads)
        if meta.get("kind") != "voxel_block_grid":
            raise ValueError("snapshot does not hold a voxel block grid")
        cfg = TsdfConfig(voxel_size=meta["voxel_size"],
                         block_resolution=meta["block_resolution"],
                         trunc=meta["trunc"],
                         frame_weight=meta.get("frame_weight", 1.0),
                         weight_max=meta.get("weight_max", 64.0))
        grid = cls(cfg, capacity=1,
                   allocation=meta.get("allocation", "ray"),
                   with_color=meta.get("with_color", False),
                   backend=loaded.backend_name, threads=threads)
        grid.global_map = loaded
        return grid

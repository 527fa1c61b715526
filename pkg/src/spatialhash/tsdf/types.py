"""Camera and volume configuration types."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera: (x, y, z) projects to (fx*x/z + cx, fy*y/z + cy)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")

    def unproject(self, u, v, z):
        """Pixel coordinates and depth to camera-frame points."""
        x = (np.asarray(u) - self.cx) / self.fx * z
        y = (np.asarray(v) - self.cy) / self.fy * z
        return np.stack([x, y, np.broadcast_to(z, np.shape(x))], axis=-1)

    def project(self, points):
        """Camera-frame points to (u, v, z); z <= 0 is behind the camera."""
        points = np.asarray(points)
        z = points[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * points[..., 0] / z + self.cx
            v = self.fy * points[..., 1] / z + self.cy
        return u, v, z


@dataclass
class Frame:
    """One depth observation: image in meters (0 = invalid), camera
    intrinsics, and a camera-to-world pose."""

    depth: np.ndarray
    intrinsics: Intrinsics
    pose: np.ndarray
    depth_min: float = 0.2
    depth_max: float = 3.0

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.depth.shape != (self.intrinsics.height, self.intrinsics.width):
            raise ValueError(
                f"depth shape {self.depth.shape} does not match intrinsics "
                f"({self.intrinsics.height}, {self.intrinsics.width})")
        self.pose = np.asarray(self.pose, dtype=np.float64).reshape(4, 4)
        rot = self.pose[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
            raise ValueError("pose rotation is not orthonormal")
        if not self.depth_min < self.depth_max:
            raise ValueError("depth_min must be < depth_max")

    @property
    def pose_inv(self) -> np.ndarray:
        inv = np.eye(4)
        rot = self.pose[:3, :3]
        inv[:3, :3] = rot.T
        inv[:3, 3] = -rot.T @ self.pose[:3, 3]
        return inv

    def valid_mask(self) -> np.ndarray:
        return (self.depth > 0) & (self.depth >= self.depth_min) & \
            (self.depth <= self.depth_max)


@dataclass(frozen=True)
class TsdfConfig:
    """Voxel block volume parameters.

    ``voxel_size`` and ``trunc`` are in meters; the signed distance stored
    per voxel is the clamped metric distance in [-trunc, trunc], not a
    normalized ratio. Blocks are dense cubes of ``block_resolution``^3
    voxels keyed by their block coordinate.
    """

    voxel_size: float = 0.0058
    block_resolution: int = 8
    trunc: float = 0.04
    frame_weight: float = 1.0
    weight_max: float = 64.0

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError("voxel size must be > 0")
        if self.block_resolution not in (8, 16):
            raise ValueError("block resolution must be 8 or 16")
        if not self.trunc > self.voxel_size:
            raise ValueError("truncation must exceed the voxel size")
        if self.frame_weight <= 0 or self.weight_max <= 0:
            raise ValueError("weights must be > 0")

    @property
    def block_size(self) -> float:
        """Block edge length in meters."""
        return self.voxel_size * self.block_resolution

from .grid import VoxelBlockGrid, block_of, voxel_of
from .raycast import raycast, sample_tsdf
from .surface import TriangleMesh, extract_mesh, extract_points
from .types import Frame, Intrinsics, TsdfConfig

__all__ = [
    "Frame", "Intrinsics", "TriangleMesh", "TsdfConfig", "VoxelBlockGrid",
    "block_of", "extract_mesh", "extract_points", "raycast", "sample_tsdf",
    "voxel_of",
]

from .pgm import depth_to_u16, read_pgm16, u16_to_depth, write_pgm16
from .ply import (read_ply, read_point_cloud, read_triangle_mesh,
                  write_point_cloud, write_triangle_mesh)
from .trajectory import (read_intrinsics, read_trajectory, write_intrinsics,
                         write_trajectory)

__all__ = [
    "depth_to_u16", "read_intrinsics", "read_pgm16", "read_ply",
    "read_point_cloud", "read_triangle_mesh", "read_trajectory",
    "u16_to_depth", "write_intrinsics", "write_pgm16", "write_point_cloud",
    "write_trajectory", "write_triangle_mesh",
]

"""Data-parallel spatial hash map and voxel block grid toolkit."""

from .geometry import (PointCloud, cube_embed, lattice_offsets, quantize,
                       radius_neighbors, set_intersection, voxel_downsample)
from .hashmap import (BatchResult, CapacityError, ConcurrentAccessError,
                      HashMap, HashSet, ValueSpec)
from .index_heap import IndexHeap, IndexHeapExhausted

__version__ = "0.1.0"

__all__ = [
    "BatchResult", "CapacityError", "ConcurrentAccessError", "HashMap",
    "HashSet", "IndexHeap", "IndexHeapExhausted", "PointCloud", "ValueSpec",
    "cube_embed", "lattice_offsets", "quantize", "radius_neighbors",
    "set_intersection", "voxel_downsample",
]

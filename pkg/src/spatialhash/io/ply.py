"""PLY reading and writing, ASCII and binary little-endian.

Vertices carry mandatory float positions plus optional uchar colors and
float normals; faces are triangles.
"""
from __future__ import annotations

import numpy as np

from ..geometry import PointCloud
from ..tsdf.surface import TriangleMesh

_PROP_DTYPES = {
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
    "short": "i2", "ushort": "u2", "int16": "i2", "uint16": "u2",
    "int": "i4", "uint": "u4", "int32": "i4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_header(f):
    if f.readline().strip() != b"ply":
        raise ValueError("not a PLY file")
    fmt = None
    elements = []  # (name, count, [(prop_name, dtype, is_list, count_dtype)])
    while True:
        line = f.readline()
        if not line:
            raise ValueError("unexpected end of PLY header")
        tokens = line.decode("ascii").strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if tokens[1] == "list":
                elements[-1][2].append(
                    (tokens[4], _PROP_DTYPES[tokens[3]], True,
                     _PROP_DTYPES[tokens[2]]))
            else:
                elements[-1][2].append(
                    (tokens[2], _PROP_DTYPES[tokens[1]], False, None))
        elif tokens[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValueError(f"unsupported PLY format {fmt!r}")
    return fmt, elements


def _read_vertex_block(f, fmt, count, props):
    if any(p[2] for p in props):
        raise ValueError("list property in vertex element")
    if fmt == "ascii":
        names = [p[0] for p in props]
        data = np.loadtxt(f, dtype=np.float64, max_rows=count, ndmin=2) \
            if count else np.zeros((0, len(props)))
        return {n: data[:, i] for i, n in enumerate(names)}
    dtype = np.dtype([(p[0], "<" + p[1]) for p in props])
    raw = np.frombuffer(f.read(dtype.itemsize * count), dtype=dtype)
    return {p[0]: raw[p[0]] for p in props}


def _read_face_block(f, fmt, count, props):
    if len(props) != 1 or not props[0][2]:
        raise ValueError("face element must hold a single list property")
    _, idx_t, _, count_t = props[0]
    faces = np.empty((count, 3), dtype=np.int64)
    if fmt == "ascii":
        for i in range(count):
            parts = f.readline().split()
            if int(parts[0]) != 3:
                raise ValueError("only triangle faces are supported")
            faces[i] = [int(parts[1]), int(parts[2]), int(parts[3])]
        return faces
    count_sz = np.dtype(count_t).itemsize
    idx_sz = np.dtype(idx_t).itemsize
    rec = np.dtype([("n", "<" + count_t), ("v", "<" + idx_t, (3,))])
    raw = np.frombuffer(f.read((count_sz + 3 * idx_sz) * count), dtype=rec)
    if count and not (raw["n"] == 3).all():
        raise ValueError("only triangle faces are supported")
    return raw["v"].astype(np.int64)


def read_ply(path):
    """Returns ``(PointCloud, triangles or None)``."""
    with open(path, "rb") as f:
        fmt, elements = _parse_header(f)
        cols = {}
        faces = None
        for name, count, props in elements:
            if name == "vertex":
                cols = _read_vertex_block(f, fmt, count, props)
            elif name == "face":
                faces = _read_face_block(f, fmt, count, props)
            else:
                raise ValueError(f"unsupported PLY element {name!r}")
    for axis in ("x", "y", "z"):
        if axis not in cols:
            raise ValueError("PLY vertex element lacks positions")
    positions = np.stack([cols["x"], cols["y"], cols["z"]], axis=1) \
        .astype(np.float64)
    colors = None
    if all(c in cols for c in ("red", "green", "blue")):
        colors = np.stack([cols["red"], cols["green"], cols["blue"]], axis=1)
    normals = None
    if all(c in cols for c in ("nx", "ny", "nz")):
        normals = np.stack([cols["nx"], cols["ny"], cols["nz"]], axis=1) \
            .astype(np.float64)
    return PointCloud(positions, colors=colors, normals=normals), faces


def read_point_cloud(path) -> PointCloud:
    cloud, _ = read_ply(path)
    return cloud


def read_triangle_mesh(path) -> TriangleMesh:
    cloud, faces = read_ply(path)
    if faces is None:
        faces = np.zeros((0, 3), np.int32)
    return TriangleMesh(cloud.positions, faces, cloud.normals)


def _vertex_layout(cloud: PointCloud):
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    lines = ["property float x", "property float y", "property float z"]
    if cloud.normals is not None:
        fields += [("nx", "<f4"), ("ny", "<f4"), ("nz", "<f4")]
        lines += ["property float nx", "property float ny",
                  "property float nz"]
    if cloud.colors is not None:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
        lines += ["property uchar red", "property uchar green",
                  "property uchar blue"]
    rec = np.zeros(len(cloud), dtype=np.dtype(fields))
    for i, n in enumerate(("x", "y", "z")):
        rec[n] = cloud.positions[:, i]
    if cloud.normals is not None:
        for i, n in enumerate(("nx", "ny", "nz")):
            rec[n] = cloud.normals[:, i]
    if cloud.colors is not None:
        colors = np.clip(np.asarray(cloud.colors), 0, 255).astype(np.uint8)
        for i, n in enumerate(("red", "green", "blue")):
            rec[n] = colors[:, i]
    return rec, lines


def _write_ply(path, cloud: PointCloud, triangles, binary: bool):
    rec, prop_lines = _vertex_layout(cloud)
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {len(cloud)}"]
    header += prop_lines
    if triangles is not None:
        header += [f"element face {len(triangles)}",
                   "property list uchar int vertex_indices"]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            f.write(rec.tobytes())
            if triangles is not None:
                face_rec = np.zeros(len(triangles),
                                    dtype=np.dtype([("n", "u1"), ("v", "<i4", (3,))]))
                face_rec["n"] = 3
                face_rec["v"] = triangles
                f.write(face_rec.tobytes())
        else:
            for row in rec:
                f.write((" ".join(_fmt_ascii(v) for v in row) + "\n").encode())
            if triangles is not None:
                for tri in np.asarray(triangles, dtype=np.int64):
                    f.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n".encode())


def _fmt_ascii(v):
    if isinstance(v, (np.floating, float)):
        return format(float(v), ".9g")
    return str(int(v))


def write_point_cloud(path, cloud: PointCloud, binary: bool = True) -> None:
    _write_ply(path, cloud, None, binary)


def write_triangle_mesh(path, mesh: TriangleMesh, binary: bool = True) -> None:
    cloud = PointCloud(mesh.vertices, normals=mesh.normals)
    _write_ply(path, cloud, mesh.triangles, binary)

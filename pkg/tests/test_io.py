import numpy as np
import pytest

from spatialhash import PointCloud
from spatialhash.io import (depth_to_u16, read_intrinsics, read_pgm16,
                            read_point_cloud, read_triangle_mesh,
                            read_trajectory, u16_to_depth, write_intrinsics,
                            write_pgm16, write_point_cloud,
                            write_trajectory, write_triangle_mesh)
from spatialhash.tsdf import Intrinsics, TriangleMesh


@pytest.mark.parametrize("binary", [True, False])
def test_point_cloud_roundtrip(binary, rng, tmp_path):
    cloud = PointCloud(rng.normal(size=(50, 3)),
                       colors=rng.integers(0, 255, size=(50, 3)),
                       normals=rng.normal(size=(50, 3)))
    path = tmp_path / "c.ply"
    write_point_cloud(path, cloud, binary=binary)
    back = read_point_cloud(path)
    assert np.allclose(back.positions, cloud.positions, atol=1e-6)
    assert np.array_equal(back.colors.astype(int), cloud.colors)
    assert np.allclose(back.normals, cloud.normals, atol=1e-6)


@pytest.mark.parametrize("binary", [True, False])
def test_mesh_roundtrip(binary, rng, tmp_path):
    mesh = TriangleMesh(rng.normal(size=(9, 3)),
                        np.array([[0, 1, 2], [3, 4, 5], [6, 7, 8]]))
    path = tmp_path / "m.ply"
    write_triangle_mesh(path, mesh, binary=binary)
    back = read_triangle_mesh(path)
    assert np.allclose(back.vertices, mesh.vertices, atol=1e-6)
    assert np.array_equal(back.triangles, mesh.triangles)


def test_positions_only_cloud(tmp_path):
    cloud = PointCloud(np.zeros((3, 3)))
    write_point_cloud(tmp_path / "p.ply", cloud)
    back = read_point_cloud(tmp_path / "p.ply")
    assert back.colors is None and back.normals is None


def test_empty_cloud_roundtrip(tmp_path):
    write_point_cloud(tmp_path / "e.ply", PointCloud(np.zeros((0, 3))))
    assert len(read_point_cloud(tmp_path / "e.ply")) == 0


def test_non_ply_rejected(tmp_path):
    (tmp_path / "bad.ply").write_bytes(b"hello\n")
    with pytest.raises(ValueError, match="PLY"):
        read_point_cloud(tmp_path / "bad.ply")


def test_pgm_roundtrip(rng, tmp_path):
    img = rng.integers(0, 65535, size=(24, 32)).astype(np.uint16)
    write_pgm16(tmp_path / "d.pgm", img)
    assert np.array_equal(read_pgm16(tmp_path / "d.pgm"), img)


def test_pgm_big_endian_on_disk(tmp_path):
    img = np.array([[0x0102]], np.uint16)
    write_pgm16(tmp_path / "one.pgm", img)
    raw = (tmp_path / "one.pgm").read_bytes()
    assert raw.endswith(b"\x01\x02")


def test_pgm_with_comments(tmp_path):
    img = np.arange(6, dtype=np.uint16).reshape(2, 3)
    body = img.astype(">u2").tobytes()
    (tmp_path / "c.pgm").write_bytes(b"P5\n# a comment\n3 2\n65535\n" + body)
    assert np.array_equal(read_pgm16(tmp_path / "c.pgm"), img)


def test_pgm_rejects_8bit(tmp_path):
    (tmp_path / "b.pgm").write_bytes(b"P5\n1 1\n255\n\x00")
    with pytest.raises(ValueError, match="16-bit"):
        read_pgm16(tmp_path / "b.pgm")


def test_depth_scaling_roundtrip(rng):
    depth = rng.uniform(0.2, 3.0, size=(8, 8))
    raw = depth_to_u16(depth, 1000.0)
    back = u16_to_depth(raw, 1000.0)
    assert np.allclose(back, depth, atol=5e-4)  # half a millimeter


def test_trajectory_roundtrip(rng, tmp_path):
    poses = []
    for _ in range(4):
        angle = rng.uniform(0, 2 * np.pi)
        pose = np.eye(4)
        pose[:3, :3] = np.array([
            [np.cos(angle), -np.sin(angle), 0],
            [np.sin(angle), np.cos(angle), 0],
            [0, 0, 1]])
        pose[:3, 3] = rng.normal(size=3)
        poses.append(pose)
    write_trajectory(tmp_path / "t.log", poses)
    back = read_trajectory(tmp_path / "t.log")
    assert len(back) == 4
    for a, b in zip(poses, back):
        assert np.allclose(a, b, atol=1e-10)


def test_trajectory_tolerates_extra_index_tokens(tmp_path):
    # some trajectory dialects write "i j k" on the index line
    pose = np.eye(4)
    lines = ["0 1 0"]
    lines += [" ".join(str(v) for v in row) for row in pose]
    (tmp_path / "t.log").write_text("\n".join(lines) + "\n")
    back = read_trajectory(tmp_path / "t.log")
    assert len(back) == 1 and np.allclose(back[0], pose)


def test_intrinsics_roundtrip(tmp_path):
    intr = Intrinsics(fx=525.0, fy=525.0, cx=319.5, cy=239.5,
                      width=640, height=480)
    write_intrinsics(tmp_path / "i.json", intr, depth_scale=5000.0)
    back, scale = read_intrinsics(tmp_path / "i.json")
    assert back == intr and scale == 5000.0

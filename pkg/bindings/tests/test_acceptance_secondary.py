"""Bindings acceptance: parity with native single-threaded calls."""
import subprocess
import sys

import numpy as np
import pytest

import spatialhash as native
import spatialhash_arrays as sa


def _case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 800))
    pool = rng.integers(-30, 30, size=(max(n // 2, 1), 3)).astype(np.int32)
    keys = pool[rng.integers(0, len(pool), size=n)]
    vals = rng.random((n, 1), dtype=np.float32)
    erase_keys = pool[rng.integers(0, len(pool), size=n // 3)]
    return keys, vals, erase_keys


def test_parity_bit_identical_20_seeds():
    for seed in range(20):
        keys, vals, erase_keys = _case(seed)
        backend = ("generic", "delegate")[seed % 2]

        nm = native.HashMap(len(keys), 3, value_specs=[np.float32],
                            backend=backend, threads=1)
        wm = sa.HashMap(len(keys), 3, value_specs=[np.float32],
                        backend=backend)

        a = nm.insert(keys, vals)
        b = wm.insert(keys, vals)
        assert np.array_equal(a.indices, b[0]) and np.array_equal(a.masks, b[1])

        a = nm.find(keys)
        b = wm.find(keys)
        assert np.array_equal(a.indices, b[0]) and np.array_equal(a.masks, b[1])

        assert np.array_equal(nm.erase(erase_keys), wm.erase(erase_keys))

        a = nm.activate(keys)
        b = wm.activate(keys)
        assert np.array_equal(a.indices, b[0]) and np.array_equal(a.masks, b[1])

        assert np.array_equal(nm.active_indices(), wm.active_indices())
        assert nm.key_buffer.tobytes() == wm.key_buffer(zero_copy=True).tobytes()
        assert nm.value_buffer(0).tobytes() == wm.value_buffer(0).tobytes()
    print("PASS: bindings parity (20 seeds, bit-identical)")


def test_shape_mismatch_raises_never_aborts():
    m = sa.HashMap(8, 3, value_specs=[np.float32])
    bad_inputs = [
        np.zeros((2, 2), np.int32),        # wrong arity
        np.zeros((2, 3), np.float64),      # float keys
        np.zeros((2, 3, 1), np.int32),     # wrong rank
        np.full((1, 3), 2**62, np.int64),  # overflow
    ]
    for bad in bad_inputs:
        with pytest.raises((ValueError, TypeError)):
            m.insert(bad, np.zeros(len(bad), np.float32))
    assert len(m) == 0  # handle still alive and consistent
    m.insert(np.array([[1, 2, 3]], np.int32), [1.0])
    assert len(m) == 1
    print("PASS: shape mismatches raise cleanly")


def test_voxel_downsample_matches_native_cli(tmp_path):
    rng = np.random.default_rng(99)
    pts = rng.uniform(-1, 1, size=(100_000, 3))
    coords, selected = sa.voxel_downsample(pts, 0.05)

    from spatialhash.io import write_point_cloud, read_point_cloud
    from spatialhash import PointCloud
    write_point_cloud(tmp_path / "in.ply", PointCloud(pts))
    proc = subprocess.run(
        [sys.executable, "-m", "spatialhash.cli", "voxelize",
         str(tmp_path / "in.ply"), "--voxel-size", "0.05",
         "--out", str(tmp_path / "out.ply"), "--threads", "1"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    cli_pts = read_point_cloud(tmp_path / "out.ply").positions
    cli_set = {tuple(np.floor(p / 0.05).astype(int)) for p in cli_pts}
    assert {tuple(c) for c in coords} == cli_set
    print("PASS: voxel_downsample matches the CLI output")

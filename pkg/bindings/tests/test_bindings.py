import numpy as np
import pytest

import spatialhash as native
import spatialhash_arrays as sa


def test_version_matches_native():
    assert sa.__version__ == native.__version__


# -- validation: offending dimension named -------------------------------------

def test_wrong_key_width_raises():
    m = sa.HashMap(8, 3, value_specs=[np.float32])
    with pytest.raises(ValueError, match="dimension 1 must be 3"):
        m.insert(np.zeros((4, 2), np.int32), np.zeros(4, np.float32))


def test_wrong_rank_raises():
    m = sa.HashMap(8, 3)
    with pytest.raises(ValueError, match="2-D"):
        m.find(np.zeros((2, 3, 1), np.int32))


def test_float_keys_raise():
    m = sa.HashMap(8, 3)
    with pytest.raises(TypeError, match="int"):
        m.find(np.zeros((2, 3), np.float32))


def test_points_shape_validated():
    with pytest.raises(ValueError, match="dimension 1 must be 3"):
        sa.voxel_downsample(np.zeros((5, 2)), 0.1)


# -- handle lifecycle -----------------------------------------------------------

def test_closed_handle_raises_never_crashes():
    m = sa.HashMap(8, 3, value_specs=[np.float32])
    m.insert(np.array([[1, 2, 3]], np.int32), [1.0])
    m.close()
    assert m.closed
    with pytest.raises(sa.HandleClosedError):
        m.find(np.array([[1, 2, 3]], np.int32))
    with pytest.raises(sa.HandleClosedError):
        m.insert(np.array([[1, 2, 3]], np.int32), [1.0])
    with pytest.raises(sa.HandleClosedError):
        len(m)
    m.close()  # double close is a no-op


def test_context_manager_closes():
    with sa.HashMap(8, 3) as m:
        m.activate(np.array([[0, 0, 0]], np.int32))
    assert m.closed


# -- copy vs zero-copy semantics ---------------------------------------------------

def test_buffer_views_copy_by_default():
    m = sa.HashMap(8, 3, value_specs=[np.float32])
    idx, _ = m.insert(np.array([[1, 1, 1]], np.int32), [5.0])
    snapshot = m.value_buffer(0)
    snapshot[idx[0], 0] = 99.0  # mutating the copy must not leak
    fresh, _ = m.find(np.array([[1, 1, 1]], np.int32))
    assert float(m.value_buffer(0)[fresh[0], 0]) == 5.0


def test_zero_copy_view_writes_through():
    m = sa.HashMap(8, 3, value_specs=[np.float32])
    idx, _ = m.insert(np.array([[1, 1, 1]], np.int32), [5.0])
    view = m.value_buffer(0, zero_copy=True)
    view[idx[0], 0] += 1.0
    again, _ = m.find(np.array([[1, 1, 1]], np.int32))
    assert float(m.value_buffer(0)[again[0], 0]) == 6.0


def test_key_buffer_read_only_even_zero_copy():
    m = sa.HashMap(8, 3)
    m.activate(np.array([[7, 8, 9]], np.int32))
    with pytest.raises(ValueError):
        m.key_buffer(zero_copy=True)[0] = 0


# -- advanced indexing round trip -----------------------------------------------------

def test_mask_indexing_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    m = sa.HashMap(16, 3, value_specs=[((1,), np.float32)])
    keys = rng.integers(-9, 9, size=(3, 3)).astype(np.int32)
    keys = np.unique(keys, axis=0)
    vals = rng.random((len(keys), 1), dtype=np.float32)
    m.insert(keys, vals)
    idx, masks = m.find(keys)
    got = m.value_buffer(0)[idx[masks]]
    assert np.array_equal(got, vals[masks])


def test_scatter_values_path():
    m = sa.HashMap(8, 3, value_specs=[np.float32])
    idx, masks = m.activate(np.array([[1, 0, 0], [2, 0, 0]], np.int32))
    m.scatter_values(0, idx[masks], np.array([[10.0], [20.0]], np.float32))
    got, _ = m.find(np.array([[2, 0, 0]], np.int32))
    assert float(m.value_buffer(0)[got[0], 0]) == 20.0


# -- hash set -----------------------------------------------------------------------

def test_hash_set_rejects_duplicates():
    s = sa.HashSet(8, 3)
    _, masks = s.insert(np.array([[1, 1, 1], [1, 1, 1]], np.int32))
    assert int(masks.sum()) == 1
    assert len(s) == 1

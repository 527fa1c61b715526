import numpy as np
import pytest

from spatialhash import (CapacityError, ConcurrentAccessError, HashMap,
                         HashSet, ValueSpec)

from conftest import SequentialMap, assert_same_content, content_of

BACKENDS = ("generic", "delegate")

pytestmark = pytest.mark.parametrize("backend", BACKENDS)


def make_map(backend, capacity=64, arity=3, specs=(np.float32,), **kw):
    return HashMap(capacity, arity, value_specs=specs, backend=backend, **kw)


# -- construction -----------------------------------------------------------

def test_create_empty(backend):
    m = make_map(backend, capacity=4)
    assert m.size == 0 and len(m) == 0
    assert m.capacity == 4


def test_bucket_count_per_backend(backend):
    m = HashMap(1000, 1, value_specs=[np.float32], backend=backend)
    assert m.bucket_count == (2000 if backend == "delegate" else 1000)


def test_zero_capacity_rejected(backend):
    with pytest.raises(ValueError):
        make_map(backend, capacity=0)


def test_bad_arity_rejected(backend):
    with pytest.raises(ValueError):
        HashMap(4, 0, backend=backend)


# -- insert -----------------------------------------------------------------

def test_insert_with_duplicate_in_batch(backend):
    m = make_map(backend, capacity=4)
    keys = np.array([[0, 0, 0], [1, 1, 1], [0, 0, 0]], np.int32)
    res = m.insert(keys, [1.0, 2.0, 3.0])
    assert m.size == 2
    assert bool(res.masks[1])
    assert res.masks[0] ^ res.masks[2]  # exactly one copy wins
    stored = float(m.value_buffer()[m.find([[0, 0, 0]]).indices[0], 0])
    assert stored in (1.0, 3.0)


def test_insert_empty_batch(backend):
    m = make_map(backend)
    res = m.insert(np.zeros((0, 3), np.int32), np.zeros((0, 1), np.float32))
    assert len(res) == 0 and m.size == 0


def test_insert_existing_key_does_not_overwrite(backend):
    m = make_map(backend)
    m.insert([[7, 7, 7]], [1.5])
    res = m.insert([[7, 7, 7]], [9.0])
    assert not res.masks[0]
    assert m.size == 1
    idx = m.find([[7, 7, 7]]).indices[0]
    assert float(m.value_buffer()[idx, 0]) == 1.5


def test_insert_masks_match_sequential_oracle(backend, rng):
    for _ in range(20):
        n = int(rng.integers(1, 400))
        pool = rng.integers(-5, 5, size=(n, 3)).astype(np.int32)
        vals = rng.random((n, 1), dtype=np.float32)
        m = make_map(backend, capacity=n)
        ref = SequentialMap()
        want = ref.insert(pool, vals)
        got = m.insert(pool, vals)
        assert int(got.masks.sum()) == int(want.sum())
        assert m.size == len(ref)
        assert_same_content(m, ref)


def test_multi_value_buffers(backend):
    m = HashMap(8, 3, value_specs=[ValueSpec((2,), np.float32), np.int32],
                backend=backend)
    keys = np.array([[1, 2, 3], [4, 5, 6]], np.int32)
    res = m.insert(keys, [[1.0, 2.0], [3.0, 4.0]], [10, 20])
    assert res.masks.all()
    f = m.find(keys)
    assert np.allclose(m.value_buffer(0)[f.indices], [[1, 2], [3, 4]])
    assert np.array_equal(m.value_buffer(1)[f.indices].ravel(), [10, 20])


def test_value_batch_length_mismatch(backend):
    m = make_map(backend)
    with pytest.raises(ValueError, match="length"):
        m.insert([[1, 1, 1], [2, 2, 2]], [1.0])


def test_value_batch_count_mismatch(backend):
    m = make_map(backend)
    with pytest.raises(ValueError, match="value batches"):
        m.insert([[1, 1, 1]])


def test_wide_value_payloads_roundtrip(backend, rng):
    # cover the 4/8/12/16-byte fast copy paths and the byte-block path
    for elems in (1, 2, 3, 4, 7, 128):
        m = HashMap(16, 3, value_specs=[ValueSpec((elems,), np.float32)],
                    backend=backend)
        keys = rng.integers(-99, 99, size=(10, 3)).astype(np.int32)
        vals = rng.random((10, elems), dtype=np.float32)
        m.insert(keys, vals)
        ref = SequentialMap()
        ref.insert(keys, vals)
        assert_same_content(m, ref)


# -- key validation -----------------------------------------------------------

def test_float_keys_rejected(backend):
    m = make_map(backend)
    with pytest.raises(ValueError, match="quantize"):
        m.insert(np.zeros((2, 3), np.float64), [1.0, 2.0])


def test_wrong_arity_rejected(backend):
    m = make_map(backend)
    with pytest.raises(ValueError, match="shape"):
        m.insert(np.zeros((2, 2), np.int32), [1.0, 2.0])


def test_int64_keys_cast_when_in_range(backend):
    m = make_map(backend)
    m.insert(np.array([[1, 2, 3]], np.int64), [1.0])
    assert m.find(np.array([[1, 2, 3]], np.int32)).masks[0]
    with pytest.raises(ValueError, match="int32"):
        m.insert(np.array([[2**40, 0, 0]], np.int64), [1.0])


def test_flat_keys_accepted_for_arity_one(backend):
    m = HashMap(8, 1, value_specs=[np.float32], backend=backend)
    res = m.insert(np.array([5, 6, 7], np.int32), [1.0, 2.0, 3.0])
    assert res.masks.all() and m.size == 3


# -- find -------------------------------------------------------------------

def test_find_on_empty_map(backend):
    m = make_map(backend)
    res = m.find([[1, 2, 3], [0, 0, 0]])
    assert not res.masks.any()


def test_find_roundtrip(backend):
    m = make_map(backend)
    m.insert([[9, 9, 9]], [4.25])
    res = m.find([[9, 9, 9]])
    assert res.masks[0]
    assert float(m.value_buffer()[res.indices[0], 0]) == 4.25


def test_find_mixed_batch(backend):
    m = make_map(backend)
    m.insert([[1, 1, 1], [3, 3, 3]], [1.0, 3.0])
    res = m.find([[1, 1, 1], [2, 2, 2], [3, 3, 3]])
    assert res.masks.tolist() == [True, False, True]


def test_find_does_not_modify(backend):
    m = make_map(backend)
    m.insert([[1, 1, 1]], [1.0])
    before = content_of(m)
    m.find(np.arange(300, dtype=np.int32).reshape(100, 3))
    assert content_of(m) == before
    assert m.size == 1


# -- activate -----------------------------------------------------------------

def test_activate_then_find_same_index(backend):
    m = make_map(backend)
    act = m.activate([[5, 5, 5]])
    assert act.masks[0]
    got = m.find([[5, 5, 5]])
    assert got.masks[0] and got.indices[0] == act.indices[0]


def test_activate_idempotent(backend):
    m = make_map(backend)
    keys = np.array([[1, 0, 0], [2, 0, 0], [3, 0, 0]], np.int32)
    first = m.activate(keys)
    second = m.activate(keys)
    assert first.masks.all() and second.masks.all()
    assert np.array_equal(first.indices, second.indices)
    assert m.size == 3


def test_activate_empty(backend):
    m = make_map(backend)
    res = m.activate(np.zeros((0, 3), np.int32))
    assert len(res) == 0 and m.size == 0


def test_activate_reports_existing_keys(backend):
    m = make_map(backend)
    m.insert([[1, 1, 1]], [1.0])
    res = m.activate([[1, 1, 1], [2, 2, 2]])
    assert res.masks.all()
    assert res.indices[0] == m.find([[1, 1, 1]]).indices[0]


def test_activate_leaves_values_untouched(backend):
    m = make_map(backend)
    m.insert([[1, 1, 1]], [42.0])
    m.activate([[1, 1, 1]])
    idx = m.find([[1, 1, 1]]).indices[0]
    assert float(m.value_buffer()[idx, 0]) == 42.0


def test_activate_duplicate_losers_masked_false(backend):
    # fresh keys duplicated in the batch resolve to one true winner, so
    # the mask can drive dedup-style selection
    m = make_map(backend)
    res = m.activate([[4, 4, 4], [4, 4, 4]])
    assert int(res.masks.sum()) == 1
    assert m.size == 1


# -- erase --------------------------------------------------------------------

def test_erase_absent_key(backend):
    m = make_map(backend)
    assert not m.erase([[1, 2, 3]])[0]


def test_erase_roundtrip(backend):
    m = make_map(backend)
    m.insert([[1, 2, 3]], [1.0])
    assert m.erase([[1, 2, 3]])[0]
    assert not m.find([[1, 2, 3]]).masks[0]
    assert m.size == 0


def test_erase_duplicate_in_batch_counts_once(backend):
    m = make_map(backend)
    m.insert([[1, 1, 1]], [1.0])
    mask = m.erase([[1, 1, 1], [1, 1, 1]])
    assert int(mask.sum()) == 1 and m.size == 0


def test_heap_fully_recycled_after_erase(backend, rng):
    c = 64
    m = make_map(backend, capacity=c, auto_rehash=False)
    k1 = np.arange(c * 3, dtype=np.int32).reshape(c, 3)
    m.insert(k1, np.ones((c, 1), np.float32))
    assert m.size == c
    m.erase(k1)
    k2 = (np.arange(c * 3, dtype=np.int32) + 100_000).reshape(c, 3)
    res = m.insert(k2, np.ones((c, 1), np.float32))
    assert res.masks.all() and m.size == c
    m.validate()


def test_insert_erase_cycling_never_leaks(backend):
    c = 32
    m = make_map(backend, capacity=c, auto_rehash=False)
    keys = np.arange(c * 3, dtype=np.int32).reshape(c, 3)
    vals = np.ones((c, 1), np.float32)
    for _ in range(1000):
        assert m.insert(keys, vals).masks.all()
        assert m.erase(keys).all()
    assert m.size == 0
    m.validate()


# -- active_indices ------------------------------------------------------------

def test_active_indices_empty(backend):
    assert make_map(backend).active_indices().size == 0


def test_active_indices_cross_checked_with_find(backend):
    m = make_map(backend)
    keys = np.array([[1, 0, 0], [2, 0, 0], [3, 0, 0]], np.int32)
    m.insert(keys, [1.0, 2.0, 3.0])
    act = m.active_indices()
    assert len(act) == 3 and len(set(act.tolist())) == 3
    res = m.find(m.key_buffer[act])
    assert res.masks.all()
    assert np.array_equal(np.sort(res.indices), np.sort(act))


def test_active_indices_drops_erased(backend):
    m = make_map(backend)
    m.insert([[1, 1, 1], [2, 2, 2]], [1.0, 2.0])
    gone = m.find([[1, 1, 1]]).indices[0]
    m.erase([[1, 1, 1]])
    assert gone not in m.active_indices().tolist()


# -- rehash ---------------------------------------------------------------------

def test_auto_rehash_on_full_map(backend, rng):
    c = 8
    m = make_map(backend, capacity=c)
    keys = rng.integers(-1000, 1000, size=(c, 3)).astype(np.int32)
    keys = np.unique(keys, axis=0)
    vals = rng.random((len(keys), 1), dtype=np.float32)
    m.insert(keys, vals)
    snapshot = content_of(m)
    extra = np.array([[5000, 5000, 5000]], np.int32)
    m.insert(extra, [123.0])
    assert m.capacity >= len(keys) + 1
    got = content_of(m)
    assert got.pop((5000, 5000, 5000))[0][0] == 123.0
    assert got == snapshot


def test_rehash_preserves_content(backend, rng):
    m = make_map(backend, capacity=32)
    keys = rng.integers(-50, 50, size=(20, 3)).astype(np.int32)
    vals = rng.random((20, 1), dtype=np.float32)
    m.insert(keys, vals)
    before = content_of(m)
    m.rehash(m.capacity)  # identity on content
    assert content_of(m) == before
    m.rehash(100)
    assert content_of(m) == before
    assert m.capacity == 100
    m.validate()


def test_rehash_below_size_rejected(backend):
    m = make_map(backend, capacity=8)
    m.insert([[1, 1, 1], [2, 2, 2]], [1.0, 2.0])
    with pytest.raises(ValueError):
        m.rehash(1)


def test_capacity_error_without_auto_rehash(backend):
    m = make_map(backend, capacity=2, auto_rehash=False)
    m.insert([[1, 1, 1], [2, 2, 2]], [1.0, 2.0])
    before = content_of(m)
    with pytest.raises(CapacityError):
        m.insert([[3, 3, 3], [4, 4, 4], [5, 5, 5]], [3.0, 4.0, 5.0])
    assert content_of(m) == before
    m.validate()


# -- buffer views -----------------------------------------------------------------

def test_in_place_value_increment(backend):
    m = make_map(backend)
    m.insert([[1, 2, 3]], [1.0])
    res = m.find([[1, 2, 3]])
    m.value_buffer()[res.indices[res.masks], 0] += 1.0
    again = m.find([[1, 2, 3]])
    assert float(m.value_buffer()[again.indices[0], 0]) == 2.0


def test_key_buffer_row_matches_inserted_key(backend):
    m = make_map(backend)
    m.insert([[11, 22, 33]], [1.0])
    idx = m.find([[11, 22, 33]]).indices[0]
    assert m.key_buffer[idx].tolist() == [11, 22, 33]


def test_buffer_lengths_equal_capacity(backend):
    m = make_map(backend, capacity=17)
    assert m.key_buffer.shape == (17, 3)
    assert m.value_buffer().shape[0] == 17


def test_key_buffer_is_read_only(backend):
    m = make_map(backend)
    with pytest.raises(ValueError):
        m.key_buffer[0] = 1


# -- hash set / serialization ------------------------------------------------------

def test_hash_set_has_no_value_buffers(backend):
    s = HashSet(16, 3, backend=backend)
    assert s.value_buffers == ()
    res = s.insert([[1, 1, 1], [1, 1, 1], [2, 2, 2]])
    assert int(res.masks.sum()) == 2 and s.size == 2


def test_serialization_roundtrip(backend, rng, tmp_path):
    m = HashMap(64, 3,
                value_specs=[ValueSpec((2,), np.float32),
                             ValueSpec((3,), np.uint8)],
                backend=backend)
    keys = rng.integers(-9, 9, size=(40, 3)).astype(np.int32)
    v0 = rng.random((40, 2), dtype=np.float32)
    v1 = rng.integers(0, 255, size=(40, 3)).astype(np.uint8)
    m.insert(keys, v0, v1)
    path = tmp_path / "snap.ashm"
    m.save(path, metadata={"note": "test"})
    loaded, meta = HashMap.load(path)
    assert meta == {"note": "test"}
    assert loaded.backend_name == m.backend_name
    assert loaded.capacity == m.capacity
    from conftest import assert_maps_equal
    assert_maps_equal(m, loaded)


def test_serialization_bad_magic(tmp_path, backend):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\0" * 64)
    with pytest.raises(ValueError, match="magic"):
        HashMap.load(path)


def test_serialization_backend_override(tmp_path, backend, rng):
    m = make_map(backend, capacity=16)
    keys = rng.integers(-9, 9, size=(10, 3)).astype(np.int32)
    keys = np.unique(keys, axis=0)
    m.insert(keys, np.arange(len(keys), dtype=np.float32))
    path = tmp_path / "snap.ashm"
    m.save(path)
    other = "generic" if backend == "delegate" else "delegate"
    loaded, _ = HashMap.load(path, backend=other)
    assert loaded.backend_name == other
    from conftest import assert_maps_equal
    assert_maps_equal(m, loaded)


def test_items_arrays_on_empty_map(backend):
    keys, values = make_map(backend).items_arrays()
    assert keys.shape == (0, 3) and values.shape[0] == 0


# -- concurrency contract -----------------------------------------------------------

def test_overlapping_mutation_is_rejected(backend):
    m = make_map(backend)
    m.insert([[1, 1, 1]], [1.0])
    with m._guard.writing():
        with pytest.raises(ConcurrentAccessError):
            m.insert([[2, 2, 2]], [2.0])
        with pytest.raises(ConcurrentAccessError):
            m.find([[1, 1, 1]])
    with m._guard.reading():
        m.find([[1, 1, 1]])  # concurrent reads allowed
        with pytest.raises(ConcurrentAccessError):
            m.erase([[1, 1, 1]])


# -- delegate pass structure ----------------------------------------------------------

def test_keys_read_only_during_hash_pass(backend):
    if backend != "delegate":
        pytest.skip("three-pass structure is delegate-specific")
    m = make_map("delegate", capacity=128)
    m._debug_checksum = True
    rng = np.random.default_rng(3)
    keys = rng.integers(-20, 20, size=(100, 3)).astype(np.int32)
    m.insert(keys, rng.random((100, 1), dtype=np.float32))
    m.insert(keys, rng.random((100, 1), dtype=np.float32))
    m.validate()

"""Property tests: the map against a plain sequential reference."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spatialhash import HashMap

from conftest import SequentialMap, assert_same_content, assert_maps_equal

key_batches = st.lists(
    st.tuples(st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6)),
    min_size=0, max_size=40)

op_sequences = st.lists(
    st.tuples(st.sampled_from(["insert", "erase", "find", "rehash"]),
              key_batches),
    min_size=1, max_size=30)


def _value_for(key):
    return np.float32(key[0] * 100 + key[1] * 10 + key[2])


def _apply(m, ref, op, batch):
    keys = np.asarray(batch, np.int32).reshape(-1, 3)
    vals = np.array([_value_for(k) for k in batch],
                    np.float32).reshape(-1, 1)
    if op == "insert":
        got = m.insert(keys, vals)
        want = ref.insert(keys, vals)
        assert int(got.masks.sum()) == int(want.sum())
    elif op == "erase":
        got = m.erase(keys)
        want = ref.erase(keys)
        assert int(got.sum()) == int(want.sum())
    elif op == "find":
        got = m.find(keys)
        assert np.array_equal(got.masks, ref.find(keys))
    else:
        m.rehash(max(2 * m.size, m.size + len(batch), 4))


@settings(max_examples=120, deadline=None)
@given(op_sequences, st.sampled_from(["generic", "delegate"]))
def test_op_sequences_match_reference(ops, backend):
    m = HashMap(4, 3, value_specs=[np.float32], backend=backend)
    ref = SequentialMap()
    for op, batch in ops:
        _apply(m, ref, op, batch)
        assert m.size == len(ref)
    assert_same_content(m, ref)
    m.validate()


@settings(max_examples=60, deadline=None)
@given(op_sequences)
def test_backend_equivalence_on_sequences(ops):
    maps = [HashMap(4, 3, value_specs=[np.float32], backend=b)
            for b in ("generic", "delegate")]
    ref = SequentialMap()
    for op, batch in ops:
        ref2 = SequentialMap()
        ref2.data = dict(ref.data)
        _apply(maps[0], ref, op, batch)
        _apply(maps[1], ref2, op, batch)
    assert_maps_equal(*maps)


@settings(max_examples=60, deadline=None)
@given(key_batches, st.sampled_from(["generic", "delegate"]))
def test_heap_conservation(batch, backend):
    m = HashMap(max(len(batch), 1), 3, value_specs=[np.float32],
                backend=backend)
    keys = np.asarray(batch, np.int32).reshape(-1, 3)
    m.insert(keys, np.ones((len(batch), 1), np.float32))
    assert m._heap.free_count + m.size == m.capacity
    m.erase(keys[: len(batch) // 2])
    assert m._heap.free_count + m.size == m.capacity
    m.validate()


@settings(max_examples=40, deadline=None)
@given(key_batches, st.sampled_from(["generic", "delegate"]),
       st.integers(1, 8))
def test_worker_count_does_not_change_content(batch, backend, threads):
    base = HashMap(max(len(batch), 1), 3, value_specs=[np.float32],
                   backend=backend, threads=1)
    other = HashMap(max(len(batch), 1), 3, value_specs=[np.float32],
                    backend=backend, threads=threads)
    keys = np.asarray(batch, np.int32).reshape(-1, 3)
    vals = np.arange(len(batch), dtype=np.float32).reshape(-1, 1)
    r1 = base.insert(keys, vals)
    r2 = other.insert(keys, vals)
    assert np.array_equal(r1.masks, r2.masks)
    assert np.array_equal(r1.indices[r1.masks], r2.indices[r2.masks])
    assert_maps_equal(base, other)


@settings(max_examples=50, deadline=None)
@given(key_batches, st.sampled_from(["generic", "delegate"]))
def test_rehash_preserves_content_property(batch, backend):
    m = HashMap(max(len(batch), 1), 3, value_specs=[np.float32],
                backend=backend)
    keys = np.asarray(batch, np.int32).reshape(-1, 3)
    vals = np.arange(len(batch), dtype=np.float32).reshape(-1, 1)
    m.insert(keys, vals)
    from conftest import content_of
    before = content_of(m)
    m.rehash(2 * m.capacity + 1)
    assert content_of(m) == before


@pytest.mark.parametrize("backend", ["generic", "delegate"])
def test_dedup_count_formula(backend, rng):
    # true insert masks == |unique(batch)| - |already present|
    m = HashMap(512, 3, value_specs=[np.float32], backend=backend)
    seen = set()
    for _ in range(30):
        n = int(rng.integers(1, 120))
        keys = rng.integers(-4, 4, size=(n, 3)).astype(np.int32)
        unique = {tuple(k) for k in keys}
        expected_new = len(unique - seen)
        res = m.insert(keys, np.ones((n, 1), np.float32))
        assert int(res.masks.sum()) == expected_new
        seen |= unique
        assert m.size == len(seen)

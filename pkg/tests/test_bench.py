import numpy as np
import pytest

from spatialhash.bench import (BenchRecord, WorkloadSpec, gen_keys, run,
                               run_grid, write_csv, read_csv, CSV_HEADER)


def test_full_uniqueness_all_distinct():
    keys = gen_keys(10, 1.0, "int3", seed=1)
    assert len(np.unique(keys, axis=0)) == 10


def test_exact_distinct_count():
    keys = gen_keys(1000, 0.1, "int3", seed=2)
    assert keys.shape == (1000, 3)
    assert len(np.unique(keys, axis=0)) == 100


def test_scalar_keys():
    keys = gen_keys(500, 0.5, "int1", seed=3)
    assert keys.shape == (500, 1)
    assert len(np.unique(keys, axis=0)) == 250


def test_seed_determinism():
    assert np.array_equal(gen_keys(200, 0.3, "int3", seed=7),
                          gen_keys(200, 0.3, "int3", seed=7))
    assert not np.array_equal(gen_keys(200, 0.3, "int3", seed=7),
                              gen_keys(200, 0.3, "int3", seed=8))


def test_invalid_uniqueness_rejected():
    with pytest.raises(ValueError):
        gen_keys(10, 0.0, "int3")
    with pytest.raises(ValueError):
        gen_keys(10, 1.5, "int3")
    with pytest.raises(ValueError):
        WorkloadSpec(uniqueness=0.0)


def test_invalid_spec_fields():
    with pytest.raises(ValueError):
        WorkloadSpec(op="delete")
    with pytest.raises(ValueError):
        WorkloadSpec(trials=0)
    with pytest.raises(ValueError):
        WorkloadSpec(value_bytes=6)


@pytest.mark.parametrize("backend", ["generic", "delegate"])
def test_insert_run_verifies_size(backend):
    spec = WorkloadSpec(op="insert", backend=backend, capacity=1000,
                        uniqueness=0.99, trials=2, seed=5)
    rec = run(spec)
    assert rec.unique_keys == 990  # ceil(0.99 * 1000)
    assert len(rec.times_ms) == 2
    assert rec.min_ms <= rec.mean_ms <= rec.max_ms


def test_activate_and_insert_share_key_semantics():
    a = run(WorkloadSpec(op="activate", capacity=500, uniqueness=0.5,
                         trials=1, seed=9))
    b = run(WorkloadSpec(op="insert", capacity=500, uniqueness=0.5,
                         trials=1, seed=9))
    assert a.unique_keys == b.unique_keys == 250


def test_find_and_erase_paths():
    run(WorkloadSpec(op="find", capacity=400, uniqueness=0.7, trials=1))
    run(WorkloadSpec(op="erase", capacity=400, uniqueness=0.7, trials=1))


def test_grid_and_csv_roundtrip(tmp_path):
    records = run_grid(WorkloadSpec(trials=2, seed=1),
                       ops=["insert", "find"], backends=["generic"],
                       key_kinds=["int3"], value_bytes_list=[4, 8],
                       capacities=[200], uniquenesses=[0.5, 1.0])
    assert len(records) == 2 * 1 * 1 * 2 * 1 * 2
    path = tmp_path / "bench.csv"
    write_csv(records, path)
    rows = read_csv(path)
    assert len(rows) == len(records) * 2
    assert list(rows[0].keys()) == CSV_HEADER

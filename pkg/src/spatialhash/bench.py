"""Synthetic workload generator and timing harness.

Workloads sweep operation, backend, key kind, value byte size, capacity
and key uniqueness. Every run constructs a fresh map per trial with
capacity equal to the batch length, times the single batch operation, and
then double-checks the result (final size and sampled lookups) so a
timing row can never come from a broken configuration. Key batches are
fully determined by the seed.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .hashmap import HashMap, ValueSpec

OPS = ("insert", "activate", "find", "erase")
KEY_KINDS = {"int3": 3, "int1": 1}
KEY_RANGE_3D = 2 ** 20  # distinct 3-D keys sample [-2^20, 2^20)^3


def gen_keys(count: int, uniqueness: float, kind: str = "int3",
             seed: int = 0) -> np.ndarray:
    """A batch of ``count`` keys containing ceil(uniqueness * count)
    distinct values; duplicates draw uniformly from the distinct pool."""
    if not 0 < uniqueness <= 1:
        raise ValueError("uniqueness must be in (0, 1]")
    if kind not in KEY_KINDS:
        raise ValueError(f"key kind must be one of {sorted(KEY_KINDS)}")
    arity = KEY_KINDS[kind]
    n_unique = int(np.ceil(uniqueness * count))
    rng = np.random.default_rng(seed)

    lo, hi = (-KEY_RANGE_3D, KEY_RANGE_3D) if arity == 3 else \
        (-(2 ** 31), 2 ** 31)
    pool = np.zeros((0, arity), dtype=np.int64)
    while len(pool) < n_unique:
        draw = rng.integers(lo, hi, size=(max(n_unique, 64), arity))
        pool = np.unique(np.concatenate([pool, draw]), axis=0)
    pool = pool[rng.permutation(len(pool))[:n_unique]]

    dup = pool[rng.integers(0, n_unique, size=count - n_unique)]
    batch = np.concatenate([pool, dup])
    rng.shuffle(batch, axis=0)
    return batch.astype(np.int32)


@dataclass(frozen=True)
class WorkloadSpec:
    op: str = "insert"
    backend: str = "generic"
    key_kind: str = "int3"
    value_bytes: int = 4
    capacity: int = 1000
    uniqueness: float = 0.99
    threads: int = 1
    trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"op must be one of {OPS}")
        if self.key_kind not in KEY_KINDS:
            raise ValueError(f"key kind must be one of {sorted(KEY_KINDS)}")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0 < self.uniqueness <= 1:
            raise ValueError("uniqueness must be in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.value_bytes < 0 or self.value_bytes % 4:
            raise ValueError("value bytes must be a non-negative multiple of 4")

    @property
    def value_specs(self) -> list[ValueSpec]:
        if self.value_bytes == 0:
            return []
        return [ValueSpec((self.value_bytes // 4,), np.float32)]


@dataclass
class BenchRecord:
    spec: WorkloadSpec
    times_ms: list[float] = field(default_factory=list)
    unique_keys: int = 0

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.times_ms))

    @property
    def min_ms(self) -> float:
        return float(np.min(self.times_ms))

    @property
    def max_ms(self) -> float:
        return float(np.max(self.times_ms))


def _fresh_map(spec: WorkloadSpec) -> HashMap:
    return HashMap(spec.capacity, KEY_KINDS[spec.key_kind],
                   value_specs=spec.value_specs, backend=spec.backend,
                   threads=spec.threads)


def run(spec: WorkloadSpec) -> BenchRecord:
    """Time one workload; map construction is excluded from the timings."""
    keys = gen_keys(spec.capacity, spec.uniqueness, spec.key_kind, spec.seed)
    n_unique = len(np.unique(keys, axis=0))
    rng = np.random.default_rng(spec.seed + 1)
    values = [rng.random((spec.capacity, s.shape[0]), dtype=np.float32)
              for s in spec.value_specs]
    record = BenchRecord(spec=spec, unique_keys=n_unique)

    for _ in range(spec.trials):
        m = _fresh_map(spec)
        if spec.op in ("find", "erase"):
            m.insert(keys, *values)

        t0 = time.perf_counter()
        if spec.op == "insert":
            m.insert(keys, *values)
        elif spec.op == "activate":
            m.activate(keys)
        elif spec.op == "find":
            res = m.find(keys)
        else:
            erased = m.erase(keys)
        record.times_ms.append((time.perf_counter() - t0) * 1e3)

        # correctness backstop
        if spec.op in ("insert", "activate"):
            assert m.size == n_unique, "size mismatch after batch"
            _spot_check(m, keys)
        elif spec.op == "find":
            assert m.size == n_unique and bool(res.masks.all())
        else:
            assert m.size == 0 and int(erased.sum()) == n_unique
    return record


def _spot_check(m: HashMap, keys: np.ndarray, samples: int = 64) -> None:
    pick = keys[:: max(1, len(keys) // samples)]
    res = m.find(pick)
    assert bool(res.masks.all()), "inserted key failed lookup"
    assert np.array_equal(m.key_buffer[res.indices], pick), \
        "lookup returned a foreign buffer index"


def run_grid(base: WorkloadSpec, ops, backends, key_kinds, value_bytes_list,
             capacities, uniquenesses) -> list[BenchRecord]:
    """Cartesian sweep; one record per combination."""
    records = []
    for op in ops:
        for backend in backends:
            for kind in key_kinds:
                for vb in value_bytes_list:
                    for cap in capacities:
                        for rho in uniquenesses:
                            spec = replace(base, op=op, backend=backend,
                                           key_kind=kind, value_bytes=vb,
                                           capacity=cap, uniqueness=rho)
                            records.append(run(spec))
    return records


CSV_HEADER = ["backend", "op", "key_kind", "value_bytes", "capacity",
              "uniqueness", "threads", "trial", "ms"]


def write_csv(records: list[BenchRecord], path) -> None:
    """One row per trial, stable column order."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for rec in records:
            s = rec.spec
            for trial, ms in enumerate(rec.times_ms):
                writer.writerow([s.backend, s.op, s.key_kind, s.value_bytes,
                                 s.capacity, s.uniqueness, s.threads, trial,
                                 f"{ms:.6f}"])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return [dict(row) for row in csv.DictReader(f)]

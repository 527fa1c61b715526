"""Binary container for map snapshots.

Layout (little-endian throughout)::

    magic      4s   = b"ASHL"
    version    u32  = 1
    capacity   u64
    n_buckets  u64
    size       u64
    key_arity  u32
    n_schemas  u32
    per schema: kind 1s, itemsize u8, ndim u8, pad u8, dims u32 * ndim
    meta_len   u32, meta_len bytes of UTF-8 JSON
    rows       size * (key_arity * 4 + sum(schema row bytes)) bytes

Rows are the active entries in ascending buffer-index order: raw key bytes
followed by each schema's value bytes. Loading reconstructs content;
buffer indices are not preserved.
"""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"ASHL"
VERSION = 1


def save_map(m, path, metadata: dict | None = None) -> None:
    from .hashmap import HashMap

    assert isinstance(m, HashMap)
    keys, *values = m.items_arrays()
    meta = {"backend": m.backend_name, "extra": metadata or {}}
    meta_bytes = json.dumps(meta).encode("utf-8")

    header = [struct.pack("<4sIQQQII", MAGIC, VERSION, m.capacity,
                          m.bucket_count, m.size, m.key_arity,
                          len(m.value_specs))]
    for spec in m.value_specs:
        header.append(struct.pack("<cBBB", spec.dtype.kind.encode(),
                                  spec.dtype.itemsize, len(spec.shape), 0))
        header.append(struct.pack(f"<{len(spec.shape)}I", *spec.shape))
    header.append(struct.pack("<I", len(meta_bytes)))
    header.append(meta_bytes)

    with open(path, "wb") as f:
        f.write(b"".join(header))
        if keys.shape[0]:
            parts = [np.ascontiguousarray(keys).view(np.uint8)
                     .reshape(len(keys), -1)]
            for arr in values:
                flat = np.ascontiguousarray(arr).reshape(len(arr), -1)
                parts.append(flat.view(np.uint8).reshape(len(arr), -1))
            f.write(np.concatenate(parts, axis=1).tobytes())


def load_map(path, backend: str | None = None, threads: int = 1):
    """Load a snapshot; returns ``(HashMap, metadata_dict)``."""
    from .hashmap import HashMap, ValueSpec

    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(fmt):
        nonlocal off
        out = struct.unpack_from(fmt, blob, off)
        off += struct.calcsize(fmt)
        return out

    magic, version, capacity, n_buckets, size, arity, n_schemas = \
        take("<4sIQQQII")
    if magic != MAGIC:
        raise ValueError(f"not a map snapshot (bad magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    specs = []
    for _ in range(n_schemas):
        kind, itemsize, ndim, _pad = take("<cBBB")
        dims = take(f"<{ndim}I")
        specs.append(ValueSpec(tuple(dims),
                               np.dtype(f"{kind.decode()}{itemsize}")))
    (meta_len,) = take("<I")
    meta = json.loads(blob[off : off + meta_len].decode("utf-8"))
    off += meta_len

    row_bytes = arity * 4 + sum(s.nbytes for s in specs)
    rows = np.frombuffer(blob, dtype=np.uint8, offset=off,
                         count=size * row_bytes).reshape(size, row_bytes)

    m = HashMap(max(int(capacity), 1), int(arity), value_specs=specs,
                backend=backend or meta.get("backend", "generic"),
                threads=threads)
    if size:
        keys = rows[:, : arity * 4].copy().view(np.int32)
        col = arity * 4
        values = []
        for s in specs:
            chunk = rows[:, col : col + s.nbytes].copy().view(s.dtype)
            values.append(chunk.reshape(size, *s.shape))
            col += s.nbytes
        m.insert(keys, *values)
    return m, meta.get("extra", {})

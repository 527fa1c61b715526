"""Integer lattice key hashing.

Keys are rows of 32-bit signed integers. Each dimension is mixed by a
distinct odd multiplier, the mixed words are combined with XOR, and the
result is reduced modulo the bucket count. Deterministic across runs and
platforms.
"""
from __future__ import annotations

import numpy as np

# Odd 32-bit multipliers; the first three are the classic lattice-hash
# primes, further dimensions derive from the golden-ratio constant.
_BASE_MULTIPLIERS = (73856093, 19349669, 83492791, 49979693)
_GOLDEN = 0x9E3779B1


def mix_multipliers(arity: int) -> np.ndarray:
    """Per-dimension odd multipliers for keys of the given arity."""
    if arity < 1:
        raise ValueError("key arity must be >= 1")
    mults = list(_BASE_MULTIPLIERS[:arity])
    for i in range(len(mults), arity):
        mults.append(((_GOLDEN * (i + 1)) | 1) & 0xFFFFFFFF)
    return np.asarray(mults, dtype=np.uint32)


def hash_keys(keys: np.ndarray, n_buckets: int) -> np.ndarray:
    """Map an (m, arity) int32 key batch to bucket indices in [0, n_buckets).

    Repeated calls on equal keys return equal buckets.
    """
    if n_buckets < 1:
        raise ValueError("bucket count must be >= 1")
    keys = np.atleast_2d(keys)
    mults = mix_multipliers(keys.shape[1])
    # uint32 view gives C wraparound semantics for the multiply.
    mixed = keys.view(np.uint32) if keys.dtype == np.int32 else keys.astype(np.uint32)
    words = mixed * mults  # (m, arity), wraps mod 2^32
    h = words[:, 0].copy()
    for d in range(1, words.shape[1]):
        h ^= words[:, d]
    return h % np.uint32(n_buckets)

"""16-bit binary PGM depth images.

P5 with maxval 65535; samples are big-endian per the Netpbm format. Depth
in meters converts through a ``depth_scale`` factor (units per meter),
with 0 meaning invalid.
"""
from __future__ import annotations

import numpy as np


def write_pgm16(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    if image.dtype != np.uint16:
        raise ValueError("PGM16 image must be uint16")
    with open(path, "wb") as f:
        f.write(f"P5\n{image.shape[1]} {image.shape[0]}\n65535\n".encode())
        f.write(image.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval; '#' starts a comment
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            pos = blob.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 65535:
        raise ValueError(f"expected 16-bit PGM, maxval {maxval}")
    data = np.frombuffer(blob, dtype=">u2", offset=pos, count=width * height)
    return data.reshape(height, width).astype(np.uint16)


def depth_to_u16(depth_m: np.ndarray, depth_scale: float = 1000.0) -> np.ndarray:
    raw = np.round(np.asarray(depth_m, dtype=np.float64) * depth_scale)
    return np.clip(raw, 0, 65535).astype(np.uint16)


def u16_to_depth(raw: np.ndarray, depth_scale: float = 1000.0) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / depth_scale

"""Trajectory and intrinsics text formats.

A trajectory file holds one block per frame: a line starting with the
frame index, then four lines with the row-major 4x4 camera-to-world pose.
Intrinsics are a JSON object with fx, fy, cx, cy, width, height and
depth_scale.
"""
from __future__ import annotations

import json

import numpy as np

from ..tsdf.types import Intrinsics


def write_trajectory(path, poses) -> None:
    with open(path, "w") as f:
        for i, pose in enumerate(poses):
            pose = np.asarray(pose, dtype=np.float64).reshape(4, 4)
            f.write(f"{i}\n")
            for row in pose:
                f.write(" ".join(format(v, ".12g") for v in row) + "\n")


def read_trajectory(path) -> list[np.ndarray]:
    poses = []
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    pos = 0
    while pos < len(lines):
        # index line may carry extra tokens; only the first matters
        int(lines[pos].split()[0])
        rows = [list(map(float, lines[pos + 1 + r].split())) for r in range(4)]
        poses.append(np.asarray(rows, dtype=np.float64))
        pos += 5
    return poses


def write_intrinsics(path, intrinsics: Intrinsics,
                     depth_scale: float = 1000.0) -> None:
    payload = {"fx": intrinsics.fx, "fy": intrinsics.fy,
               "cx": intrinsics.cx, "cy": intrinsics.cy,
               "width": intrinsics.width, "height": intrinsics.height,
               "depth_scale": depth_scale}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def read_intrinsics(path) -> tuple[Intrinsics, float]:
    with open(path) as f:
        data = json.load(f)
    intr = Intrinsics(fx=float(data["fx"]), fy=float(data["fy"]),
                      cx=float(data["cx"]), cy=float(data["cy"]),
                      width=int(data["width"]), height=int(data["height"]))
    return intr, float(data.get("depth_scale", 1000.0))

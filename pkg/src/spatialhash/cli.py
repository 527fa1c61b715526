"""Command-line interface.

Subcommands: ``bench`` (workload sweeps to CSV), ``report`` (figures and a
summary table from bench CSV), ``voxelize`` (PLY point cloud
downsampling), ``synth`` (synthetic datasets and volumes), ``integrate``
(depth sequence to volume snapshot), ``raycast`` (snapshot to depth PGM)
and ``mesh`` (snapshot to PLY surface).

All paths are resolved against ``--root`` (default: current directory).
Commands never modify their input files and exit nonzero with a one-line
diagnostic on any parse or validation failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import geometry
from .io import pgm as pgm_io
from .io import ply as ply_io
from .io import trajectory as traj_io
from .tsdf import (Frame, TsdfConfig, VoxelBlockGrid, extract_mesh,
                   extract_points, raycast)
from .tsdf import synthetic

_MODE_DEFAULTS = {
    "fast": {"block_resolution": 8, "allocation": "ray"},
    "complete": {"block_resolution": 16, "allocation": "neighbor"},
}


def _resolve(root: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else root / p


def _parse_list(text: str, cast):
    return [cast(tok) for tok in text.split(",") if tok]


def _read_config(path: Path) -> dict:
    """key=value lines; '#' starts a comment."""
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# -- bench / report ------------------------------------------------------

def cmd_bench(args) -> int:
    root = Path(args.root)
    if args.full_grid:
        value_bytes = [4 * 2 ** j for j in range(13)]
        capacities = [10 ** j for j in range(3, 7)]
        rhos = [0.1, 0.99]
    else:
        value_bytes = _parse_list(args.value_bytes, int)
        capacities = _parse_list(args.capacities, int)
        rhos = _parse_list(args.rho, float)
    base = bench_mod.WorkloadSpec(trials=args.trials, threads=args.threads,
                                  seed=args.seed)
    records = bench_mod.run_grid(
        base,
        ops=_parse_list(args.ops, str),
        backends=_parse_list(args.backends, str),
        key_kinds=_parse_list(args.key_kinds, str),
        value_bytes_list=value_bytes,
        capacities=capacities,
        uniquenesses=rhos)
    out = _resolve(root, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bench_mod.write_csv(records, out)
    print(f"wrote {sum(len(r.times_ms) for r in records)} trial rows "
          f"({len(records)} configurations) to {out}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.root)
    from .report import render_report
    produced = render_report(_resolve(root, args.csv),
                             _resolve(root, args.out_dir))
    for p in produced:
        print(f"wrote {p}")
    return 0


# -- voxelize -------------------------------------------------------------

def cmd_voxelize(args) -> int:
    root = Path(args.root)
    if args.voxel_size <= 0:
        raise ValueError("--voxel-size must be > 0")
    cloud = ply_io.read_point_cloud(_resolve(root, args.input))
    coords, selected = geometry.voxel_downsample(
        cloud, args.voxel_size, threads=args.threads)
    out = _resolve(root, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ply_io.write_point_cloud(out, cloud.select(selected),
                             binary=not args.ascii)
    print(f"{len(cloud)} points -> {len(coords)} voxels "
          f"(s={args.voxel_size:g}) -> {out}")
    return 0


# -- synth ---------------------------------------------------------------

def cmd_synth(args) -> int:
    root = Path(args.root)
    intr = synthetic.DEFAULT_INTRINSICS
    if args.width != intr.width or args.height != intr.height:
        scale = args.width / intr.width
        from .tsdf import Intrinsics
        intr = Intrinsics(fx=intr.fx * scale, fy=intr.fy * scale,
                          cx=(args.width - 1) / 2, cy=(args.height - 1) / 2,
                          width=args.width, height=args.height)
    if args.target == "dataset":
        out_dir = _resolve(root, args.out)
        frames = synthetic.make_frames(
            args.shape, n_frames=args.frames, intrinsics=intr,
            plane_z=args.plane_z,
            sphere_center=(0.0, 0.0, args.plane_z),
            sphere_radius=args.radius)
        depth_dir = out_dir / "depth"
        depth_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(frames):
            pgm_io.write_pgm16(depth_dir / f"{i:06d}.pgm",
                               pgm_io.depth_to_u16(frame.depth,
                                                   args.depth_scale))
        traj_io.write_trajectory(out_dir / "trajectory.log",
                                 [f.pose for f in frames])
        traj_io.write_intrinsics(out_dir / "intrinsics.json", intr,
                                 args.depth_scale)
        (out_dir / "pipeline.cfg").write_text(
            "depth_dir = depth\n"
            "trajectory = trajectory.log\n"
            "intrinsics = intrinsics.json\n"
            f"mode = {args.mode}\n"
            "output = volume.ashm\n")
        print(f"wrote {len(frames)} {args.shape} frames to {out_dir}")
        return 0

    # analytically filled volume snapshot
    cfg_kwargs = {}
    if args.voxel_size is not None:
        cfg_kwargs["voxel_size"] = args.voxel_size
    if args.trunc is not None:
        cfg_kwargs["trunc"] = args.trunc
    if args.shape == "sphere":
        cfg = TsdfConfig(**{"voxel_size": 0.01, "trunc": 0.03, **cfg_kwargs})
        grid = synthetic.fill_sphere_volume(cfg, radius=args.radius)
    else:
        cfg = TsdfConfig(**cfg_kwargs)
        grid = synthetic.fill_plane_volume(cfg, z=args.plane_z)
    out = _resolve(root, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    grid.save(out)
    print(f"wrote analytic {args.shape} volume ({grid.block_count} blocks) "
          f"to {out}")
    return 0


# -- integrate -------------------------------------------------------------

def _load_dataset(root: Path, cfg: dict):
    intr_path = _resolve(root, cfg.get("intrinsics", "intrinsics.json"))
    traj_path = _resolve(root, cfg.get("trajectory", "trajectory.log"))
    depth_dir = _resolve(root, cfg.get("depth_dir", "depth"))
    if not intr_path.is_file():
        raise FileNotFoundError(f"intrinsics file not found: {intr_path}")
    if not traj_path.is_file():
        raise FileNotFoundError(f"trajectory file not found: {traj_path}")
    intr, depth_scale = traj_io.read_intrinsics(intr_path)
    if "depth_scale" in cfg:
        depth_scale = float(cfg["depth_scale"])
    poses = traj_io.read_trajectory(traj_path)
    depth_min = float(cfg.get("depth_min", 0.2))
    depth_max = float(cfg.get("depth_max", 3.0))
    frames = []
    for i, pose in enumerate(poses):
        path = depth_dir / f"{i:06d}.pgm"
        if not path.is_file():
            raise FileNotFoundError(f"depth image not found: {path}")
        depth = pgm_io.u16_to_depth(pgm_io.read_pgm16(path), depth_scale)
        frames.append(Frame(depth, intr, pose, depth_min, depth_max))
    return frames


def cmd_integrate(args) -> int:
    root = Path(args.root)
    if args.synthetic:
        if not args.out:
            raise ValueError("--out is required with --synthetic")
        mode = args.mode or "fast"
        import tempfile
        with tempfile.TemporaryDirectory() as tmp:
            synth_args = argparse.Namespace(
                root=tmp, target="dataset", shape=args.synthetic,
                out=".", frames=args.frames, width=320, height=240,
                depth_scale=1000.0, plane_z=1.0, radius=0.3, mode=mode,
                voxel_size=None, trunc=None)
            cmd_synth(synth_args)
            return _integrate_dataset(Path(tmp), {"mode": mode},
                                      _resolve(root, args.out), args)
    if not args.config:
        raise ValueError("either --config or --synthetic is required")
    cfg = _read_config(_resolve(root, args.config))
    if args.mode:
        cfg["mode"] = args.mode
    out = _resolve(root, args.out or cfg.get("output", "volume.ashm"))
    return _integrate_dataset(root, cfg, out, args)


def _integrate_dataset(root: Path, cfg: dict, out: Path, args) -> int:
    mode = cfg.get("mode", "fast")
    if mode not in _MODE_DEFAULTS:
        raise ValueError(f"mode must be 'fast' or 'complete', got {mode!r}")
    defaults = _MODE_DEFAULTS[mode]
    tsdf_cfg = TsdfConfig(
        voxel_size=float(cfg.get("voxel_size", 0.0058)),
        block_resolution=int(cfg.get("block_resolution",
                                     defaults["block_resolution"])),
        trunc=float(cfg.get("trunc", 0.04)),
        frame_weight=float(cfg.get("frame_weight", 1.0)),
        weight_max=float(cfg.get("weight_max", 64.0)))
    frames = _load_dataset(root, cfg)
    grid = VoxelBlockGrid(tsdf_cfg,
                          capacity=int(cfg.get("capacity", 20000)),
                          allocation=defaults["allocation"],
                          threads=args.threads)
    for i, frame in enumerate(frames):
        grid.integrate_frame(frame)
    out.parent.mkdir(parents=True, exist_ok=True)
    grid.save(out)
    print(f"integrated {len(frames)} frames ({mode} mode) -> "
          f"{grid.block_count} blocks -> {out}")
    return 0


# -- raycast ----------------------------------------------------------------

def cmd_raycast(args) -> int:
    root = Path(args.root)
    grid = VoxelBlockGrid.load(_resolve(root, args.volume),
                               threads=args.threads)
    intr, depth_scale = traj_io.read_intrinsics(_resolve(root, args.intrinsics))
    if args.trajectory:
        poses = traj_io.read_trajectory(_resolve(root, args.trajectory))
        if not 0 <= args.frame < len(poses):
            raise ValueError(f"frame {args.frame} outside trajectory "
                             f"(length {len(poses)})")
        pose = poses[args.frame]
    else:
        pose = np.eye(4)
    if args.mode == "local":
        # a snapshot has no per-frame local map; stage one holding every
        # stored block so the local query path is exercised
        keys = grid.block_keys(grid.active_block_indices())
        if len(keys):
            from .hashmap import HashMap
            local = HashMap(max(len(keys), 1), 3, value_specs=[np.int32])
            res = local.activate(keys)
            gi, gm = grid.global_map.find(keys)
            local.value_buffer(0)[res.indices[res.masks], 0] = gi[gm]
            grid.local_map = local
    depth, mask = raycast(grid, intr, pose, mode=args.mode)
    out = _resolve(root, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pgm_io.write_pgm16(out, pgm_io.depth_to_u16(depth, depth_scale))
    print(f"raycast {int(mask.sum())}/{mask.size} pixels hit -> {out}")
    return 0


# -- mesh -------------------------------------------------------------------

def cmd_mesh(args) -> int:
    root = Path(args.root)
    grid = VoxelBlockGrid.load(_resolve(root, args.volume),
                               threads=args.threads)
    out = _resolve(root, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.points:
        cloud = extract_points(grid)
        ply_io.write_point_cloud(out, cloud, binary=not args.ascii)
        print(f"extracted {len(cloud)} points -> {out}")
    else:
        mesh = extract_mesh(grid)
        ply_io.write_triangle_mesh(out, mesh, binary=not args.ascii)
        print(f"extracted {len(mesh.vertices)} vertices, "
              f"{len(mesh.triangles)} triangles -> {out}")
    return 0


# -- parser -------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--root", default=".",
                   help="directory that relative paths resolve against")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker count for batch operations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatialhash",
        description="Spatial hash map toolkit: benchmarks, voxelization "
                    "and volumetric reconstruction.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run workload sweeps, write CSV")
    _add_common(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--ops", default="insert,find,activate")
    p.add_argument("--backends", default="generic,delegate")
    p.add_argument("--key-kinds", default="int3")
    p.add_argument("--value-bytes", default="4,64,1024")
    p.add_argument("--capacities", default="1000,10000")
    p.add_argument("--rho", default="0.1,0.99")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full-grid", action="store_true",
                   help="sweep 13 value sizes x 4 capacities x 2 rho")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="render figures from bench CSV")
    _add_common(p)
    p.add_argument("--csv", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("voxelize", help="voxel downsample a PLY point cloud")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("--voxel-size", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ascii", action="store_true", help="write ASCII PLY")
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("synth", help="generate synthetic data")
    _add_common(p)
    p.add_argument("target", choices=("dataset", "volume"))
    p.add_argument("--shape", choices=("plane", "sphere"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--depth-scale", type=float, default=1000.0)
    p.add_argument("--plane-z", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=0.3)
    p.add_argument("--mode", choices=("fast", "complete"), default="fast")
    p.add_argument("--voxel-size", type=float, default=None)
    p.add_argument("--trunc", type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("integrate", help="fuse a depth dataset into a volume")
    _add_common(p)
    p.add_argument("--config", help="key=value pipeline config file")
    p.add_argument("--synthetic", choices=("plane", "sphere"),
                   help="skip the dataset and fuse generated frames")
    p.add_argument("--frames", type=int, default=10,
                   help="frame count with --synthetic")
    p.add_argument("--mode", choices=("fast", "complete"), default=None)
    p.add_argument("--out", help="volume snapshot path")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("raycast", help="render a depth image from a volume")
    _add_common(p)
    p.add_argument("--volume", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--trajectory", help="pose source (default: identity)")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--mode", choices=("global", "local"), default="global")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_raycast)

    p = sub.add_parser("mesh", help="extract a surface from a volume")
    _add_common(p)
    p.add_argument("--volume", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--points", action="store_true",
                   help="extract a point cloud instead of a mesh")
    p.add_argument("--ascii", action="store_true", help="write ASCII PLY")
    p.set_defaults(func=cmd_mesh)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, AssertionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Render benchmark CSV output into figures and a summary table.

One figure per (operation, key kind): mean time against value byte size,
one curve per (backend, capacity, uniqueness). A second figure overlays
insert against activate where both were measured. Writes PNG files plus
``summary.csv`` with per-configuration aggregates.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import read_csv  # noqa: E402


def _aggregate(rows: list[dict]):
    """mean/min/max ms per full configuration."""
    groups = defaultdict(list)
    for row in rows:
        key = (row["backend"], row["op"], row["key_kind"],
               int(row["value_bytes"]), int(row["capacity"]),
               float(row["uniqueness"]), int(row["threads"]))
        groups[key].append(float(row["ms"]))
    out = []
    for key in sorted(groups):
        ms = groups[key]
        out.append({"backend": key[0], "op": key[1], "key_kind": key[2],
                    "value_bytes": key[3], "capacity": key[4],
                    "uniqueness": key[5], "threads": key[6],
                    "trials": len(ms), "mean_ms": sum(ms) / len(ms),
                    "min_ms": min(ms), "max_ms": max(ms)})
    return out


def _write_summary(summary: list[dict], path: Path) -> None:
    cols = ["backend", "op", "key_kind", "value_bytes", "capacity",
            "uniqueness", "threads", "trials", "mean_ms", "min_ms", "max_ms"]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=cols)
        writer.writeheader()
        for row in summary:
            writer.writerow({**row, "mean_ms": f"{row['mean_ms']:.6f}",
                             "min_ms": f"{row['min_ms']:.6f}",
                             "max_ms": f"{row['max_ms']:.6f}"})


def _curves_by(summary, op, kind):
    rows = [r for r in summary if r["op"] == op and r["key_kind"] == kind]
    curves = defaultdict(list)
    for r in rows:
        curves[(r["backend"], r["capacity"], r["uniqueness"])].append(
            (r["value_bytes"], r["mean_ms"]))
    return {label: sorted(pts) for label, pts in curves.items()}


def _plot_value_sweep(summary, op, kind, path: Path) -> bool:
    curves = _curves_by(summary, op, kind)
    if not curves or all(len(pts) < 2 for pts in curves.values()):
        pass  # still render single-point data for completeness
    if not curves:
        return False
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (backend, cap, rho), pts in sorted(curves.items()):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker="o",
                label=f"{backend}, c={cap:g}, rho={rho:g}")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("value size (bytes)")
    ax.set_ylabel("mean time (ms)")
    ax.set_title(f"{op} ({kind} keys)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def _plot_activate_vs_insert(summary, kind, path: Path) -> bool:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    drew = False
    for op, style in (("insert", "-"), ("activate", "--")):
        for (backend, cap, rho), pts in sorted(_curves_by(summary, op, kind).items()):
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.plot(xs, ys, style, marker="o",
                    label=f"{op} {backend}, c={cap:g}, rho={rho:g}")
            drew = True
    if not drew:
        plt.close(fig)
        return False
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("value size (bytes)")
    ax.set_ylabel("mean time (ms)")
    ax.set_title(f"insert vs activate ({kind} keys)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def render_report(csv_path, out_dir) -> list[Path]:
    """Write summary.csv and figures; returns the paths produced."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"no benchmark rows in {csv_path}")
    summary = _aggregate(rows)
    produced = [out / "summary.csv"]
    _write_summary(summary, produced[0])

    ops = sorted({r["op"] for r in summary})
    kinds = sorted({r["key_kind"] for r in summary})
    for kind in kinds:
        for op in ops:
            path = out / f"time_vs_value_bytes_{op}_{kind}.png"
            if _plot_value_sweep(summary, op, kind, path):
                produced.append(path)
        if "insert" in ops and "activate" in ops:
            path = out / f"activate_vs_insert_{kind}.png"
            if _plot_activate_vs_insert(summary, kind, path):
                produced.append(path)
    return produced

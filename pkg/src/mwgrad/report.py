"""Render figures from an experiment's emitted files.

Reads only what run/rates already wrote (aggregate CSVs, snapshot JSONL,
merit CSVs) and saves PNGs next to them; it never recomputes anything,
so a report can be regenerated at any time from the data alone.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_METHOD_STYLE = {
    "mwgrad_svgd": ("tab:blue", "-"),
    "amwgrad_svgd": ("tab:blue", "--"),
    "mwgrad_blob": ("tab:orange", "-"),
    "amwgrad_blob": ("tab:orange", "--"),
    "mwgrad": ("tab:blue", "-"),
    "amwgrad": ("tab:orange", "--"),
}


def _read_aggregate(path: Path) -> tuple[list[int], list[float], list[float]]:
    iters, mean, std = [], [], []
    with path.open() as handle:
        for row in csv.DictReader(handle):
            iters.append(int(row["iter"]))
            mean.append(float(row["grad_norm_mean"]))
            std.append(float(row["grad_norm_std"]))
    return iters, mean, std


def _style(method: str):
    return _METHOD_STYLE.get(method, ("tab:gray", "-"))


def render_gradnorm_figures(out_dir: Path) -> list[Path]:
    """One figure per step size: mean gradient norm (log scale) with a
    +-1 std band, one curve per method."""
    out_dir = Path(out_dir)
    cells: dict[str, list[tuple[str, Path]]] = {}
    for agg in sorted(out_dir.glob("*/eta_*/aggregate.csv")):
        eta_label = agg.parent.name
        method = agg.parent.parent.name
        cells.setdefault(eta_label, []).append((method, agg))
    figures = []
    for eta_label, entries in sorted(cells.items()):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for method, path in sorted(entries):
            iters, mean, std = _read_aggregate(path)
            color, linestyle = _style(method)
            ax.plot(iters, mean, color=color, linestyle=linestyle, label=method)
            lower = [max(m - s, 1e-300) for m, s in zip(mean, std)]
            upper = [m + s for m, s in zip(mean, std)]
            ax.fill_between(iters, lower, upper, color=color, alpha=0.15, linewidth=0)
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel("gradient norm")
        ax.set_title(eta_label.replace("eta_", "step size "))
        ax.legend(fontsize=8)
        fig.tight_layout()
        target = out_dir / f"gradnorm_{eta_label}.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        figures.append(target)
    return figures


def render_particle_figures(out_dir: Path, max_panels: int = 12) -> list[Path]:
    """Scatter grids of particle positions over the snapshot iterations,
    one figure per (method, step size) that recorded snapshots (trial 0)."""
    out_dir = Path(out_dir)
    figures = []
    for snap in sorted(out_dir.glob("*/eta_*/snapshots_trial_0.jsonl")):
        frames = []
        with snap.open() as handle:
            for line in handle:
                payload = json.loads(line)
                frames.append((payload["iter"], payload["positions"]))
        if not frames:
            continue
        if len(frames) > max_panels:
            idx = [round(i * (len(frames) - 1) / (max_panels - 1)) for i in range(max_panels)]
            frames = [frames[i] for i in idx]
        cols = min(4, len(frames))
        rows = (len(frames) + cols - 1) // cols
        fig, axes = plt.subplots(rows, cols, figsize=(2.6 * cols, 2.6 * rows), squeeze=False)
        for ax in axes.flat:
            ax.set_axis_off()
        for ax, (n, positions) in zip(axes.flat, frames):
            xs = [p[0] for p in positions]
            ys = [p[1] for p in positions] if len(positions[0]) > 1 else [0.0] * len(positions)
            ax.set_axis_on()
            ax.scatter(xs, ys, s=8, color="tab:blue", alpha=0.8)
            ax.set_title(f"iter {n}", fontsize=8)
            ax.set_xlim(-7, 7)
            ax.set_ylim(-7, 7)
            ax.set_xticks([])
            ax.set_yticks([])
        eta_label = snap.parent.name
        method = snap.parent.parent.name
        fig.suptitle(f"{method} {eta_label.replace('eta_', 'step size ')}", fontsize=10)
        fig.tight_layout()
        target = out_dir / f"particles_{method}_{eta_label}.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        figures.append(target)
    return figures


def render_merit_figure(out_dir: Path) -> list[Path]:
    """Merit decay curves from a rate scenario on log axes."""
    out_dir = Path(out_dir)
    merit_files = sorted(out_dir.glob("merit_*.csv"))
    if not merit_files:
        return []
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for path in merit_files:
        ts, vs = [], []
        with path.open() as handle:
            for row in csv.DictReader(handle):
                t, v = float(row["t"]), float(row["merit"])
                if t > 0 and v > 0:
                    ts.append(t)
                    vs.append(v)
        label = path.stem.replace("merit_", "")
        color, linestyle = _style(label.split("_eta")[0])
        ax.plot(ts, vs, color=color, linestyle=linestyle, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("merit")
    ax.legend(fontsize=8)
    fig.tight_layout()
    target = out_dir / "merit_curves.png"
    fig.savefig(target, dpi=150)
    plt.close(fig)
    return [target]


def render_all(out_dir) -> list[Path]:
    """Render whatever the directory's contents support."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"no such output directory: {out_dir}")
    figures = []
    figures.extend(render_gradnorm_figures(out_dir))
    figures.extend(render_particle_figures(out_dir))
    figures.extend(render_merit_figure(out_dir))
    return figures

"""Figures and plot scripts for the CSV artifacts.

Two render targets: PNG files drawn directly (object-oriented matplotlib
API, safe under the sweep's worker threads), and self-contained gnuplot
scripts that reproduce the same figure from the CSVs alone.  Profiles
with a jump are drawn as two segments with a dashed marker at x = 0;
snapshot overlays are labeled by their time stamps.
"""
from __future__ import annotations

import os

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .errors import ArtifactError, DomainError
from .io_csv import profile_split_row, read_profile_csv, read_snapshot_csv, snapshot_time

_STYLES = ("profile", "snapshots")


def _check_paths(paths) -> list[str]:
    paths = list(paths)
    if not paths:
        raise ArtifactError("no artifacts to plot")
    for p in paths:
        if not os.path.isfile(p):
            raise ArtifactError(f"missing artifact {p}")
    return paths


def _new_axes(ylabel: str):
    fig = Figure(figsize=(7.0, 4.5))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    ax.set_xlabel("x")
    ax.set_ylabel(ylabel)
    ax.axvline(0.0, color="0.4", linestyle="--", linewidth=0.9)
    return fig, ax


def render_profile_png(csv_paths, out_path: str, title: str | None = None) -> str:
    """Draw one curve per profile CSV; jump profiles become two segments
    of a shared color so no spurious vertical line is drawn."""
    csv_paths = _check_paths(csv_paths)
    fig, ax = _new_axes("Q")
    for path in csv_paths:
        meta, _, xs, qs = read_profile_csv(path)
        label = f"trace {meta['trace_plus']:.5g}"
        split = profile_split_row(path)
        if split is None:
            ax.plot(xs, qs, linewidth=1.4, label=label)
        else:
            (line,) = ax.plot(xs[:split], qs[:split], linewidth=1.4, label=label)
            ax.plot(xs[split:], qs[split:], linewidth=1.4, color=line.get_color())
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(out_path, dpi=110)
    return out_path


def render_snapshots_png(csv_paths, out_path: str, title: str | None = None) -> str:
    """Overlay simulation snapshots, one labeled curve per file."""
    csv_paths = _check_paths(csv_paths)
    fig, ax = _new_axes("rho")
    for path in csv_paths:
        t, xs, rho = read_snapshot_csv(path)
        ax.plot(xs, rho, linewidth=1.2, label=f"t={t:g}")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(out_path, dpi=110)
    return out_path


def emit_plot_script(csv_paths, style: str, out_path: str, title: str | None = None) -> str:
    """Write a self-contained gnuplot script rendering the given CSVs.

    style "profile" draws x vs Q with jumps as two segments (the split
    row is looked up from the data and baked into the script); style
    "snapshots" overlays x vs rho curves labeled by their time stamps.
    """
    if style not in _STYLES:
        raise DomainError(f"unknown plot style {style!r}; expected one of {_STYLES}")
    csv_paths = _check_paths(csv_paths)
    root = os.path.dirname(os.path.abspath(out_path))
    png_name = os.path.splitext(os.path.basename(out_path))[0] + ".png"

    lines = [
        "#!/usr/bin/env gnuplot",
        "set datafile separator ','",
        "set terminal pngcairo size 900,600",
        f"set output '{png_name}'",
        "set xlabel 'x'",
        "set grid",
        "set arrow from 0, graph 0 to 0, graph 1 nohead dashtype 2 lc rgb '#888888'",
    ]
    if title:
        lines.append(f"set title '{title}'")

    clauses = []
    if style == "profile":
        lines.insert(6, "set ylabel 'Q'")
        for k, path in enumerate(csv_paths):
            rel = os.path.relpath(path, start=root)
            meta, _, _, _ = read_profile_csv(path)
            label = f"trace {meta['trace_plus']:.5g}"
            split = profile_split_row(path)
            if split is None:
                clauses.append(f"'{rel}' using 1:2 with lines lt {k + 1} title '{label}'")
            else:
                clauses.append(
                    f"'{rel}' every ::0::{split - 1} using 1:2 with lines lt {k + 1} title '{label}'"
                )
                clauses.append(f"'{rel}' every ::{split} using 1:2 with lines lt {k + 1} notitle")
    else:
        lines.insert(6, "set ylabel 'rho'")
        for k, path in enumerate(csv_paths):
            rel = os.path.relpath(path, start=root)
            t = snapshot_time(path)
            clauses.append(f"'{rel}' using 1:2 with lines lt {k + 1} title 't={t:g}'")

    lines.append("plot \\")
    lines.extend(f"    {c}, \\" for c in clauses[:-1])
    lines.append(f"    {clauses[-1]}")
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return out_path

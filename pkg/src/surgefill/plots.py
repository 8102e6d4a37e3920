"""Static SVG report emitters with delimited sidecars.

Figures are rendered straight from Figure objects (no global pyplot
state) with a fixed svg hash salt and no embedded creation date, so the
same inputs always produce byte-identical SVG files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .data import SurgeDataset, order_nodes

_SVG_RC = {"svg.hashsalt": "surgefill"}


def _save_svg(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def emit_heatmap(ds: SurgeDataset, path: str | Path,
                 title: str | None = None) -> Path:
    """Render the surge matrix as an SVG heat map.

    Nodes are laid out in canonical order on the x axis, time steps on
    the y axis. Missing entries render white; the color range is scaled
    to this storm's observed values only.
    """
    perm = order_nodes(ds)
    values = np.ma.masked_invalid(ds.surge[:, perm])
    cmap = matplotlib.colormaps["viridis"].copy()
    cmap.set_bad("white")

    fig = Figure(figsize=(9.0, 4.5))
    ax = fig.subplots()
    image = ax.imshow(values, aspect="auto", origin="lower",
                      interpolation="nearest", cmap=cmap)
    ax.set_xlabel("node (canonical order)")
    ax.set_ylabel("time step")
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, label="surge")
    fig.tight_layout()
    return _save_svg(fig, path)


def emit_timeseries(ds: SurgeDataset, node_id: str,
                    imputed: dict[str, np.ndarray],
                    path: str | Path,
                    truth: np.ndarray | None = None) -> tuple[Path, Path]:
    """Render one node's surge series as SVG plus a CSV sidecar.

    `imputed` maps method names to completed matrices (or single-node
    series); a column is plotted for each. The sidecar holds exactly the
    plotted values with a per-row provenance flag and floats serialized
    via repr, so parsing it back reproduces the series bit for bit.
    Returns (svg_path, csv_path).
    """
    if node_id not in ds.node_ids:
        raise ValueError(f"unknown node id {node_id!r}")
    s = ds.node_ids.index(node_id)

    def node_series(arr: np.ndarray, what: str) -> np.ndarray:
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape == (ds.n_t, ds.n_s):
            return arr[:, s]
        if arr.shape == (ds.n_t,):
            return arr
        raise ValueError(f"{what}: expected ({ds.n_t}, {ds.n_s}) matrix or "
                         f"({ds.n_t},) series, got {arr.shape}")

    observed = ds.surge[:, s]
    node_mask = ds.mask[:, s]
    series = {name: node_series(arr, name) for name, arr in imputed.items()}
    truth_series = None if truth is None else node_series(truth, "truth")

    fig = Figure(figsize=(8.0, 4.0))
    ax = fig.subplots()
    if truth_series is not None:
        ax.plot(ds.times, truth_series, color="black", linestyle="--",
                linewidth=1.0, label="truth")
    for name, values in series.items():
        ax.plot(ds.times, values, linewidth=1.2, label=name)
    ax.plot(ds.times[node_mask == 1], observed[node_mask == 1], "o",
            color="black", markersize=3.5, label="observed")
    missing_rate = float(np.mean(node_mask == 0))
    ax.set_xlabel("time (h)")
    ax.set_ylabel("surge")
    ax.set_title(f"node {node_id} (missing rate {missing_rate:.0%})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    svg_path = _save_svg(fig, path)

    csv_path = svg_path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        header = ["time", "provenance", "observed"] + list(series)
        if truth_series is not None:
            header.append("truth")
        writer.writerow(header)
        for t in range(ds.n_t):
            row = [repr(float(ds.times[t])),
                   "observed" if node_mask[t] == 1 else "missing",
                   repr(float(observed[t])) if node_mask[t] == 1 else ""]
            row.extend(repr(float(values[t])) for values in series.values())
            if truth_series is not None:
                row.append(repr(float(truth_series[t])))
            writer.writerow(row)
    return svg_path, csv_path


def emit_structure_histogram(pairs: list[tuple[int, int]] | tuple,
                             path: str | Path,
                             title: str | None = None) -> Path:
    """Render (area, count) pairs as an SVG bar chart.

    Pairs are plotted in ascending area order; an empty list yields a
    figure with an explanatory annotation instead of bars.
    """
    pairs = sorted((int(a), int(c)) for a, c in pairs)
    fig = Figure(figsize=(8.0, 4.0))
    ax = fig.subplots()
    if pairs:
        areas = [a for a, _ in pairs]
        counts = [c for _, c in pairs]
        ax.bar(range(len(pairs)), counts, color="tab:blue")
        ax.set_xticks(range(len(pairs)))
        ax.set_xticklabels([str(a) for a in areas], rotation=90, fontsize=7)
    else:
        ax.annotate("no rectangles above cutoff", xy=(0.5, 0.5),
                    xycoords="axes fraction", ha="center", va="center")
    ax.set_xlabel("rectangle area (cells)")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save_svg(fig, path)

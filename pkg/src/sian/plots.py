"""Figure rendering for shape grids, score tables, and training traces.

Everything draws through the Agg backend and writes straight to files, so
these helpers work headless and never open a window.  Figures accompany the
delimited exports; the CSV/JSON files remain the canonical artifacts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .detect import ArchipelagoReport
from .model import ShapeGrid

__all__ = [
    "save_shape_figure",
    "save_score_histogram",
    "save_training_curve",
]


def save_shape_figure(grid: ShapeGrid, path) -> bool:
    """Render one shape function: line, heatmap, or a row of slice heatmaps.

    Interactions of four or more features have no sensible static picture;
    those return False and write nothing.
    """
    label = grid.interaction.label
    order = grid.interaction.order
    if order == 1:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(grid.axes[0], grid.values, lw=1.5)
        ax.axhline(0.0, color="gray", lw=0.6, alpha=0.6)
        ax.set_xlabel(f"x{label}")
        ax.set_ylabel("contribution")
        ax.set_title(f"shape {label}")
    elif order == 2:
        fig, ax = plt.subplots(figsize=(4.6, 3.8))
        mesh = ax.pcolormesh(
            grid.axes[0], grid.axes[1], grid.values.T, shading="nearest"
        )
        fig.colorbar(mesh, ax=ax, label="contribution")
        i, j = grid.interaction.indices
        ax.set_xlabel(f"x{i}")
        ax.set_ylabel(f"x{j}")
        ax.set_title(f"shape {label}")
    elif order == 3:
        n_slices = min(4, len(grid.axes[2]))
        picks = np.linspace(0, len(grid.axes[2]) - 1, n_slices).astype(int)
        fig, axes = plt.subplots(
            1, n_slices, figsize=(3.2 * n_slices, 3.4), squeeze=False
        )
        vmin = float(grid.values.min())
        vmax = float(grid.values.max())
        i, j, k = grid.interaction.indices
        for ax, sl in zip(axes[0], picks):
            mesh = ax.pcolormesh(
                grid.axes[0], grid.axes[1], grid.values[:, :, sl].T,
                shading="nearest", vmin=vmin, vmax=vmax,
            )
            ax.set_title(f"x{k} = {grid.axes[2][sl]:.2f}", fontsize=9)
            ax.set_xlabel(f"x{i}")
            ax.set_ylabel(f"x{j}")
        fig.colorbar(mesh, ax=axes[0].tolist(), label="contribution")
        fig.suptitle(f"shape {label}")
    else:
        return False
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return True


def save_score_histogram(report: ArchipelagoReport, path) -> bool:
    """Histogram of detection strengths, one panel per interaction degree."""
    if not report.records:
        return False
    by_degree: dict[int, list[float]] = {}
    for rec in report.records:
        by_degree.setdefault(rec.interaction.order, []).append(rec.score)
    degrees = sorted(by_degree)
    fig, axes = plt.subplots(
        len(degrees), 1, figsize=(5.5, 2.1 * len(degrees)), squeeze=False
    )
    for ax, k in zip(axes[:, 0], degrees):
        scores = by_degree[k]
        ax.hist(scores, bins=min(30, max(5, len(scores))), color="steelblue")
        ax.set_ylabel("count")
        ax.set_title(f"degree {k} ({len(scores)} sets)", fontsize=9)
    axes[-1, 0].set_xlabel("mean strength")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return True


def save_training_curve(trace: list[dict], path) -> bool:
    """Train and validation loss by epoch on a log scale."""
    if not trace:
        return False
    epochs = np.arange(1, len(trace) + 1)
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    ax.plot(epochs, [t["train_loss"] for t in trace], label="train")
    ax.plot(epochs, [t["val_loss"] for t in trace], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return True

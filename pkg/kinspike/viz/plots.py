#!/usr/bin/env python3
"""
Report Plots
Confusion heat map, ablation bar chart, embedding scatter and comparison chart,
written as self-contained SVG. The hash salt is fixed and the date metadata is
dropped so repeated runs write identical files.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import seaborn as sns  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402

from kinspike.analysis.confusion import ConfusionMatrix  # noqa: E402
from kinspike.analysis.embedding import EmbeddingPlot  # noqa: E402

logger = logging.getLogger(__name__)

EMBEDDING_GID = "embedding-points"
PALETTE = "husl"

_RC = {
    "svg.hashsalt": "kinspike",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.titleweight": "bold",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Saved plot: {path}")
    return path


def create_confusion_heatmap(matrix: ConfusionMatrix, path, title: str = "Confusion matrix") -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 6))
        sns.heatmap(
            pd.DataFrame(matrix.counts, index=list(matrix.classes), columns=list(matrix.classes)),
            annot=True, fmt="d", cmap="Blues", cbar=True, square=True, ax=ax,
        )
        ax.set_xlabel("Predicted")
        ax.set_ylabel("True")
        ax.set_title(f"{title} (accuracy {matrix.accuracy:.3f})")
        return _save(fig, path)


def create_ablation_chart(frame: pd.DataFrame, path, title: str = "Feature importance") -> Path:
    """Horizontal bars of baseline - ablated accuracy, one per feature."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(9, 7))
        colors = ["#c0392b" if d > 0 else "#2e86c1" for d in frame["delta"]]
        ax.barh(frame["feature"], frame["delta"] * 100.0, color=colors)
        ax.axvline(0.0, color="black", linewidth=0.8)
        ax.invert_yaxis()
        ax.set_xlabel("Accuracy drop when removed (percentage points)")
        ax.set_title(title)
        ax.grid(True, axis="x", alpha=0.3)
        return _save(fig, path)


def create_embedding_scatter(plot: EmbeddingPlot, path, title: str = "t-SNE of penultimate activations") -> Path:
    """All points in one marker collection tagged with the embedding gid."""
    classes = sorted(set(plot.labels))
    palette = dict(zip(classes, sns.color_palette(PALETTE, len(classes))))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 7))
        points = ax.scatter(
            plot.coords[:, 0], plot.coords[:, 1],
            c=[palette[label] for label in plot.labels], s=12, alpha=0.8, linewidths=0,
        )
        points.set_gid(EMBEDDING_GID)
        handles = [
            Line2D([], [], marker="o", linestyle="", color=palette[label], label=label) for label in classes
        ]
        ax.legend(handles=handles, title=plot.target, loc="best", frameon=True)
        ax.set_xticks([])
        ax.set_yticks([])
        ax.set_title(title)
        return _save(fig, path)


def create_comparison_chart(frame: pd.DataFrame, path, title: str = "Base vs SNN accuracy") -> Path:
    """Grouped bars: one group per (kind, mode), base and SNN side by side."""
    labels = [f"{k}\n{m}" for k, m in zip(frame["kind"], frame["mode"])]
    x = np.arange(len(labels))
    colors = sns.color_palette(PALETTE, 2)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(10, 5))
        ax.bar(x - 0.2, frame["base_accuracy"], width=0.4, color=colors[0], label="Base")
        ax.bar(x + 0.2, frame["snn_accuracy"], width=0.4, color=colors[1], label="SNN")
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_ylim(0.0, 1.0)
        ax.set_ylabel("Test accuracy")
        ax.set_title(title)
        ax.legend(loc="lower right")
        ax.grid(True, axis="y", alpha=0.3)
        return _save(fig, path)

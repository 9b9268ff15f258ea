#!/usr/bin/env python3
"""
SVG figures for feedwatch reports
"""

import logging
from pathlib import Path

import matplotlib as mpl

mpl.use("svg")
mpl.rcParams.update({
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "feedwatch",
})

import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("Saved %s", path)
    return path


def plot_roc(roc_points, auc, path, title="ROC"):
    """``roc_points`` is a frame with fpr/tpr columns (roc_points.csv)."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(roc_points["fpr"], roc_points["tpr"], drawstyle="default", label=f"AUC = {auc:.4f}")
    ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=0.8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_sweep(sweep, path, title="Accuracy by observation period"):
    """``sweep`` is a frame with window/mean_accuracy/std_accuracy columns."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(sweep["window"], sweep["mean_accuracy"], yerr=sweep["std_accuracy"],
                marker="o", markersize=3, capsize=2)
    ax.set_xlabel("Observation period (minutes)")
    ax.set_ylabel("Cross-validated accuracy")
    ax.set_title(title)
    ax.grid(True, linewidth=0.3)
    return _save(fig, path)

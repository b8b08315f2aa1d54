"""Figure rendering for the CLI report path.

Figures are written next to the delimited output when plotting is requested;
the CSV remains the primary, byte-reproducible artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_profile_figure(path, z, values, *, ylabel="profile value", title=None):
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(z, values, lw=1.8)
    ax.set_xlabel("z (coupling-window units)" if np.max(np.abs(z)) < 64 else "position z")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_trajectory_figure(path, z, snapshots, *, ylabel="error probability", title=None):
    """Overlay periodic snapshots of a traveling decoding profile."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    cmap = plt.get_cmap("viridis")
    n = max(len(snapshots) - 1, 1)
    for i, (it, vals) in enumerate(snapshots):
        ax.plot(z, vals, color=cmap(i / n), lw=1.2, label=f"iter {it}")
    ax.set_xlabel("position z")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(snapshots) <= 8:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_figure(path, params, series, *, xlabel="channel parameter", title=None):
    """One line per measure across the swept channel parameter."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for name, values in series.items():
        pts = [(p, v) for p, v in zip(params, values) if v is not None]
        if not pts:
            continue
        ax.plot(*zip(*pts), marker="o", ms=4, lw=1.5, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("velocity (w-normalized positions / iteration)")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path

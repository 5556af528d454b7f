"""Figure rendering for the CLI report path.

Every figure is written to a file next to the delimited output it
illustrates; nothing is shown interactively (Agg backend).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def disk_figure(path, coords, communities=None, sizes=None, title=""):
    """Scatter of ball coordinates (first two dimensions) inside the
    unit circle, colored by community, sized by degree."""
    coords = np.asarray(coords, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.add_patch(plt.Circle((0, 0), 1.0, fill=False, color="0.6", lw=1.0))
    xy = coords[:, :2]
    c = None if communities is None else np.asarray(communities)
    s = 14.0 if sizes is None else 8.0 + 3.0 * np.sqrt(np.asarray(sizes, dtype=float))
    sc = ax.scatter(xy[:, 0], xy[:, 1], c=c, s=s, cmap="tab10", alpha=0.85,
                    edgecolors="none")
    if c is not None:
        fig.colorbar(sc, ax=ax, shrink=0.75, label="community")
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def metrics_figure(path, precision, map_score, title="alignment metrics"):
    """Grouped bars of Precision@k and MAP@k over the requested ks."""
    ks = sorted(precision)
    x = np.arange(len(ks))
    width = 0.38
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    ax.bar(x - width / 2, [precision[k] for k in ks], width, label="Precision@k")
    ax.bar(x + width / 2, [map_score[k] for k in ks], width, label="MAP@k")
    ax.set_xticks(x, [str(k) for k in ks])
    ax.set_xlabel("k")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def objective_figure(path, history, title="training objective"):
    """Objective value per outer iteration."""
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    ax.plot(range(1, len(history) + 1), history, marker="o", ms=3)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("objective")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

"""Figure rendering for CLI reports.

Every function writes one image file and returns its path.  The Agg backend
is selected so that no display is needed.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_REGION_STYLE = {"stability": dict(color="tab:blue"), "throughput": dict(color="tab:red")}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_region_curves(curves: dict, path, title: str = ""):
    """``curves`` maps a series name to an ``(n, 2)`` array of (lambda1, lambda2)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for name, pts in curves.items():
        pts = np.asarray(pts, dtype=float)
        if len(pts) == 0:
            continue
        kind = name.split(":")[0]
        ax.plot(pts[:, 0], pts[:, 1], label=name, **_REGION_STYLE.get(kind, {}))
    ax.set_xlabel("lambda1")
    ax.set_ylabel("lambda2")
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def plot_series(x, series: dict, path, xlabel: str = "x", ylabel: str = "L",
                title: str = ""):
    """Line plot of several named series against a common ``x``."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, ys in series.items():
        ys = np.asarray(ys, dtype=float)
        style = "o" if name.endswith("oracle") else "-"
        ax.plot(x, ys, style, label=name, markersize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)

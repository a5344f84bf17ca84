"""Matplotlib figures written next to the tabular outputs."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .export import GREY_BELOW, area_alpha  # noqa: E402

# no timestamps or version strings, so reruns give identical bytes
_META = {"Software": None}


def plot_strategy(path, network, p, q, areas, alpha, title: str = ""):
    """Edges drawn with width by flow, areas tinted by alpha, ambush marks in red."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    pos = network.positions
    fig, ax = plt.subplots(figsize=(6, 6), dpi=100)
    if areas.cells is not None:
        a_alpha = area_alpha(areas, alpha)
        for a, (x0, y0, x1, y1) in enumerate(areas.cells):
            ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, facecolor="#d95f02", alpha=0.35 * a_alpha[a],
                                   edgecolor="#bbbbbb", linewidth=0.4))
    segs = np.stack([pos[network.tails], pos[network.heads]], axis=1)
    faint = p < GREY_BELOW
    ax.add_collection(LineCollection(segs[faint], colors="#d0d0d0", linewidths=0.3))
    top = p.max() if p.size and p.max() > 0 else 1.0
    ax.add_collection(LineCollection(segs[~faint], colors="#1f3f99", linewidths=0.5 + 4.5 * p[~faint] / top))
    centers = areas.centers(pos)
    hot = np.flatnonzero(q > 1e-12)
    if hot.size:
        ax.scatter(centers[hot, 0], centers[hot, 1], s=300 * q[hot] / q.max(), c="red", alpha=0.6, zorder=3)
    for v, c in ((network.origin, "#1b9e77"), (network.destination, "black")):
        ax.plot(*pos[v], "o", color=c, ms=7, zorder=4)
    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)


def plot_sweep(path, rows):
    """Four metrics against sqrt(n), one line per method (means over seeds)."""
    rows = [r for r in rows if r.status == "ok"]
    fig, axes = plt.subplots(2, 2, figsize=(9, 7), dpi=100)
    names = [("outcome", "outcome V"), ("energy", "energy E (m)"), ("spreading", "spreading"), ("entropy", "entropy (nats)")]
    for method in sorted({r.method for r in rows}):
        sub = [r for r in rows if r.method == method]
        sizes = sorted({r.n for r in sub})
        x = [math.sqrt(n) for n in sizes]
        for ax, (attr, _) in zip(axes.flat, names):
            y = [np.nanmean([getattr(r, attr) for r in sub if r.n == n]) for n in sizes]
            ax.plot(x, y, "o-", label=method)
    for ax, (_, label) in zip(axes.flat, names):
        ax.set_xlabel("sqrt(n)")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    if rows:
        axes[0, 0].legend()
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)

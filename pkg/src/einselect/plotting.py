"""Deterministic SVG output through matplotlib's Agg/SVG backends."""
from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

RASTER_ABOVE = 256 * 256


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "einselect"
    matplotlib.rcParams["svg.fonttype"] = "none"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    fig.clf()
    import matplotlib.pyplot as plt

    plt.close(fig)


def heatmap(grid, path, title: str | None = None) -> None:
    """
    Wigner function on a diverging palette centered on zero.

    Grids above 256^2 cells are drawn as an embedded raster image.
    """
    plt = _pyplot()
    W = np.asarray(grid.W)
    lim = float(np.max(np.abs(W))) or 1.0
    fig, ax = plt.subplots(figsize=(6, 4.5))
    extent = (grid.x_min, grid.x_max, grid.p_min, grid.p_max)
    if W.size > RASTER_ABOVE:
        im = ax.imshow(W.T, origin="lower", extent=extent, aspect="auto", cmap="RdBu_r",
                       vmin=-lim, vmax=lim, interpolation="nearest")
    else:
        im = ax.pcolormesh(grid.x, grid.p, W.T, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="nearest")
    fig.colorbar(im, ax=ax, label="W(x, p)")
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    if title:
        ax.set_title(title)
    _save(fig, path)


def lines(x: Sequence[float], series: Mapping[str, Sequence[float]], path, xlabel: str = "t",
          ylabel: str = "", logy: bool = False, title: str | None = None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        ax.plot(x, y, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)

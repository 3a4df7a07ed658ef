"""
Functionality for rendering traces and coverage maps of polysquare surfaces as SVG.
"""
import os
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import Manifold  # noqa: E402
from .stats import CoverageReport  # noqa: E402
from .tracer import Trace  # noqa: E402


def _draw_cells(ax, manifold):
    for cell in manifold.cells:
        ax.add_patch(plt.Rectangle((cell.i, cell.j), 1, 1, fill=False, edgecolor="gray", linewidth=0.8))
    for vertex in manifold.singular_vertices:
        points = np.array([[float(x) for x in point] for point in vertex.ambient_points])
        ax.scatter(points[:, 0], points[:, 1], color="red", s=12, zorder=3)


def _set_limits(ax, manifold):
    cells = np.array([cell[:2] for cell in manifold.cells])
    ax.set_xlim(cells[:, 0].min() - 0.1, cells[:, 0].max() + 1.1)
    ax.set_ylim(cells[:, 1].min() - 0.1, cells[:, 1].max() + 1.1)
    ax.set_aspect("equal")


def plot_trace(trace_: Trace, path: Union[str, os.PathLike]) -> None:
    """Draw the segments of a trace on a surface as polylines and save them as SVG.

    Args:
        trace_: The trace, on a surface.
        path: The output path.
    """
    manifold = trace_.manifold
    if manifold.dim != 2:
        raise ValueError(f"Traces can only be drawn for surfaces, got a {manifold.dim}d manifold.")
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_cells(ax, manifold)
    for segment in trace_.segments:
        offset = np.array(segment.cell[:2], dtype="float64")
        line = np.array([[float(x) for x in segment.entry], [float(x) for x in segment.exit]]) + offset
        ax.plot(line[:, 0], line[:, 1], color="tab:blue", linewidth=0.6)
    _set_limits(ax, manifold)
    ax.set_title(f"{manifold.name}, direction {trace_.direction}")
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_coverage(report: CoverageReport, manifold: Manifold, path: Union[str, os.PathLike]) -> None:
    """Draw the first-visit times of a coverage report on a surface as heatmap and save it as SVG.

    Args:
        report: The coverage report.
        manifold: The surface the report was computed for.
        path: The output path.
    """
    if manifold.dim != 2:
        raise ValueError(f"Coverage maps can only be drawn for surfaces, got a {manifold.dim}d manifold.")
    fig, ax = plt.subplots(figsize=(6, 6))
    finite = report.visited[np.isfinite(report.visited)]
    vmax = finite.max() if finite.size else 1.0
    for cell, times in zip(report.cells, report.visited):
        # the first index of the sub-cell grid runs along x
        image = np.ma.masked_invalid(times.T)
        mappable = ax.imshow(
            image, origin="lower", extent=(cell.i, cell.i + 1, cell.j, cell.j + 1),
            cmap="viridis", vmin=0, vmax=vmax,
        )
    _draw_cells(ax, manifold)
    _set_limits(ax, manifold)
    fig.colorbar(mappable, ax=ax, label="first visit time")
    ax.set_title(f"{manifold.name}, eps = {report.eps}")
    fig.savefig(path, format="svg")
    plt.close(fig)

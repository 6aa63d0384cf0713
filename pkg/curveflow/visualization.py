"""
Visualization tools
"""

import pathlib
from typing import Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

# fixed ids and no date so identical inputs give identical files
matplotlib.rcParams["svg.hashsalt"] = "curveflow"
SVG_METADATA = {"Date": None}


def _save(fig, path) -> pathlib.Path:
    path = pathlib.Path(path)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return path


def plot_lines(
    series: Union[pd.Series, Mapping[str, pd.Series]],
    path,
    xlabel: str = "r",
    ylabel: Optional[str] = None,
    title: Optional[str] = None,
) -> pathlib.Path:
    """Plots one or several series against their index as an SVG line plot."""
    if isinstance(series, pd.Series):
        series = {series.name or ylabel or "value": series}
    if not series or all(len(s) == 0 for s in series.values()):
        raise ValueError("nothing to plot, series is empty")
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, s in series.items():
        ax.plot(s.index.to_numpy(), s.to_numpy(), label=str(label))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel or (next(iter(series)) if len(series) == 1 else "value"))
    if len(series) > 1:
        ax.legend()
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_field(
    values: np.ndarray,
    axis: np.ndarray,
    path,
    levels: Optional[Sequence[float]] = None,
    label: str = "u",
    cmap: str = "viridis",
    title: Optional[str] = None,
) -> pathlib.Path:
    """Plots a nodal field on [-L, L]^2 as an SVG heat map with level curves overlaid."""
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.any(np.isfinite(values)):
        raise ValueError("nothing to plot, field is empty")
    fig, ax = plt.subplots(figsize=(5, 4.5))
    extent = (axis[0], axis[-1], axis[0], axis[-1])
    image = ax.imshow(
        np.ma.masked_invalid(values).T,
        origin="lower",
        extent=extent,
        cmap=cmap,
        interpolation="nearest",
    )
    fig.colorbar(image, ax=ax, label=label)
    if levels is None:
        levels = [0.0]
    levels = sorted(level for level in levels if np.nanmin(values) < level < np.nanmax(values))
    if levels:
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        ax.contour(X, Y, np.ma.masked_invalid(values), levels=levels, colors="k", linewidths=0.8)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def emit_plot(series, path, **kwargs) -> pathlib.Path:
    """Writes a self contained SVG plot of series to path.

    A pandas Series (or a mapping of them) gives a line plot against the
    index; a (values, axis) pair of a 2D field gives a heat map with level
    curves.
    """
    if isinstance(series, tuple):
        values, axis = series
        return plot_field(values, axis, path, **kwargs)
    return plot_lines(series, path, **kwargs)

"""Figure rendering for CLI runs.

Figures are written next to the CSV output and only when asked for; the CSV
files remain the primary record.  The Agg backend is selected so rendering
works without a display.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["STYLE", "figure_size", "render_sweep", "render_trajectory"]

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def figure_size(width_pt: float = 345.0, rows: int = 1) -> tuple[float, float]:
    """Width from a LaTeX column in points, height from the golden ratio per row."""
    width = width_pt / 72.27
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    return width, width * golden * (0.75 if rows > 1 else 1.0) * rows


def _positive(values: np.ndarray) -> np.ndarray:
    out = np.asarray(values, dtype=float).copy()
    out[out <= 0] = np.nan
    return out


def render_trajectory(
    path,
    times,
    norms,
    event_times=(),
    V=None,
    title: str | None = None,
    log_scale: bool = True,
) -> Path:
    """State norm (and ``V`` when given) against time, impulses marked as ticks."""
    path = Path(path)
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    rows = 2 if V is not None else 1
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, 1, sharex=True, figsize=figure_size(rows=rows), squeeze=False)
        ax = axes[0, 0]
        ax.plot(times, _positive(norms) if log_scale else norms, color="k")
        if log_scale and np.any(norms > 0):
            ax.set_yscale("log")
        ax.set_ylabel(r"$\|x(t)\|$")
        if len(event_times):
            lo, hi = ax.get_ylim()
            ax.vlines(event_times, lo, hi, colors="0.75", linewidth=0.4, zorder=0)
            ax.set_ylim(lo, hi)
        if V is not None:
            vx = axes[1, 0]
            vx.plot(times, _positive(V) if log_scale else V, color="tab:blue")
            if log_scale and np.any(np.asarray(V) > 0):
                vx.set_yscale("log")
            vx.set_ylabel(r"$V(t)$")
        axes[-1, 0].set_xlabel(r"$t$")
        if title:
            axes[0, 0].set_title(title)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
        plt.close(fig)
    return path


def render_sweep(path, values, metric, parameter: str, metric_name: str = "margin") -> Path:
    """Metric against the swept parameter with the zero line drawn for margins."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    metric = np.asarray(metric, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figure_size())
        ax.plot(values, metric, marker=".", color="k")
        if metric_name == "margin":
            ax.axhline(0.0, color="tab:red", linewidth=0.6)
        ax.set_xlabel(parameter)
        ax.set_ylabel(metric_name)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
        plt.close(fig)
    return path

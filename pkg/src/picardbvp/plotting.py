"""PNG figures for the CLI ``--plot`` flag.

Everything renders through the Agg backend straight to files; nothing here
opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.4,
    "savefig.bbox": "tight",
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_solution(path: Path, t: np.ndarray, y: np.ndarray, exact: np.ndarray | None = None,
                  title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, y, label="Picard")
        if exact is not None:
            ax.plot(t, exact, "--", color="k", lw=1.0, label="exact")
        ax.set_xlabel("t")
        ax.set_ylabel("y")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_convergence(path: Path, deltas: Sequence[float], errors: Sequence[float] | None = None,
                     title: str = "") -> Path:
    """Semilog history of the per-iteration change and, if given, the unknown's error."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        k = np.arange(1, len(deltas) + 1)
        # zeros would vanish on a log axis
        floor = np.finfo(float).tiny
        ax.semilogy(k, np.maximum(deltas, floor), "o-", ms=3, label="sup change")
        if errors is not None:
            ax.semilogy(k, np.maximum(errors, floor), "s-", ms=3, label="unknown error")
        ax.set_xlabel("iteration k")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_segments(path: Path, pieces: Sequence[tuple[np.ndarray, np.ndarray]], nodes: Sequence[float],
                  title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for j, (t, y) in enumerate(pieces, start=1):
            ax.plot(t, y, label=f"segment {j}")
        for x in nodes[1:-1]:
            ax.axvline(x, color="0.6", lw=0.8, ls=":")
        ax.set_xlabel("t")
        ax.set_ylabel("y")
        ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def plot_comparison(path: Path, t: np.ndarray, y_picard: np.ndarray, y_oracle: np.ndarray,
                    title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, (top, bottom) = plt.subplots(2, 1, sharex=True, height_ratios=(2, 1))
        top.plot(t, y_oracle, color="k", lw=1.0, label="RK4 shooting")
        top.plot(t, y_picard, "--", label="Picard")
        top.set_ylabel("y")
        top.set_title(title)
        top.legend()
        bottom.plot(t, np.abs(y_picard - y_oracle), color="C3")
        bottom.set_ylabel("|diff|")
        bottom.set_xlabel("t")
        return _save(fig, path)

"""Static figures for the CLI reports (Agg backend, files only)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import TorusGrid  # noqa: E402
from .models import IsoperimetricProfile  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.4),
    "svg.hashsalt": "conemetric",  # stable ids so reruns give identical SVG
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path


def plot_isoperimetric(profile: IsoperimetricProfile, path: str | Path, title: str = "") -> Path:
    """Ratio L^2 / (4 pi A) against ball radius, with the predicted limit as a dashed line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        pts = sorted(profile.samples, key=lambda s: s.r)
        r = [s.r for s in pts]
        ax.semilogx(r, [s.ratio for s in pts], "o-", ms=3, lw=1, label="sampled ratio")
        ax.axhline(profile.limit, color="k", ls="--", lw=0.8, label=f"limit {profile.limit:g}")
        ax.set_xlabel("radius r")
        ax.set_ylabel(r"$L^2 / (4\pi A)$")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        return _save(fig, path)


def plot_field(grid: TorusGrid, values: np.ndarray, path: str | Path,
               points: Sequence[complex] = (), title: str = "", clip: float | None = None) -> Path:
    z = grid.nodes
    v = np.asarray(values, dtype=float)
    if clip is not None:
        v = np.clip(v, -clip, clip)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.6, 4.0))
        mesh = ax.pcolormesh(z.real, z.imag, v, shading="gouraud", cmap="viridis")
        fig.colorbar(mesh, ax=ax, shrink=0.85)
        for p in points:
            ax.plot(p.real, p.imag, "r+", ms=8)
        ax.set_aspect("equal")
        ax.set_xlabel("Re z")
        ax.set_ylabel("Im z")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_residuals(history: Sequence[float], path: str | Path, tol: float | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(range(len(history)), np.maximum(history, 1e-300), "s-", ms=3)
        if tol is not None:
            ax.axhline(tol, color="k", ls=":", lw=0.8)
        ax.set_xlabel("Newton step")
        ax.set_ylabel("sup |F(u)|")
        return _save(fig, path)


def plot_defects(labels: Sequence[str], defects: Sequence[float], path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.arange(len(labels))
        ax.bar(x, defects, color="0.4")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=90 if len(labels) > 12 else 0)
        ax.axhline(0, color="k", lw=0.6)
        ax.set_ylabel(r"angle defect $2\pi - \theta_v$")
        return _save(fig, path)

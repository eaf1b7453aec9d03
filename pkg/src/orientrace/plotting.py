"""Figures written to files: tracking overlays, completion fields, M_psi maps."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

EDGE_COLOR = "red"
CENTER_COLOR = "cyan"
BIFURCATION_COLOR = "yellow"
CROSSING_COLOR = "red"


def _segment_arrays(seg):
    if hasattr(seg, "points"):
        pts = seg.points
        if not pts:
            return None, None, None
        return (np.array([p.c for p in pts]), np.array([p.u for p in pts]), np.array([p.v for p in pts]))
    return np.array(seg.centers), None, None


def overlay(path, image, segments=(), junctions=(), optic_disk=None, dpi: int = 100) -> None:
    """Paint edges (red), centerlines (cyan), junctions and the optic disk over the image."""
    img = np.asarray(getattr(image, "data", image), dtype=float)
    rows, cols = img.shape[:2]
    fig = plt.figure(figsize=(cols / dpi, rows / dpi), dpi=dpi)
    ax = fig.add_axes([0, 0, 1, 1])
    ax.imshow(img, cmap="gray" if img.ndim == 2 else None, interpolation="nearest")
    for seg in segments:
        c, u, v = _segment_arrays(seg)
        if c is None:
            continue
        if u is not None:
            ax.plot(u[:, 0], u[:, 1], color=EDGE_COLOR, lw=0.8)
            ax.plot(v[:, 0], v[:, 1], color=EDGE_COLOR, lw=0.8)
        ax.plot(c[:, 0], c[:, 1], color=CENTER_COLOR, lw=0.8)
    for j in junctions:
        doc = j.to_json() if hasattr(j, "to_json") else j
        color = CROSSING_COLOR if doc["kind"] == "crossing" else BIFURCATION_COLOR
        ax.plot(doc["x"], doc["y"], "o", ms=6, mfc="none", mec=color, mew=1.5)
    if optic_disk is not None:
        doc = optic_disk.to_json() if hasattr(optic_disk, "to_json") else optic_disk
        ax.add_patch(plt.Circle(doc["center"], doc["radius"], fill=False, color="lime", lw=1))
    ax.set_xlim(-0.5, cols - 0.5)
    ax.set_ylim(rows - 0.5, -0.5)
    ax.axis("off")
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def completion_figure(path, xs, ys, field_xy, mode, cubic) -> None:
    """Completion field marginalized over orientation with the mode and the cubic on top."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.imshow(field_xy.T, origin="lower", aspect="auto", extent=[xs[0], xs[-1], ys[0], ys[-1]], cmap="magma")
    ax.plot(mode.x, mode.y, color="cyan", lw=2, label="mode")
    ax.plot(cubic.x, cubic.y, "w--", lw=1, label="cubic")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def m_psi_figure(path, m_psi: np.ndarray, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(np.fft.fftshift(m_psi), cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def width_regression_figure(path, truth, measured, slope, intercept) -> None:
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(truth, measured, ".", ms=3)
    if np.isfinite(slope):
        x = np.array([min(truth), max(truth)])
        ax.plot(x, intercept + slope * x, "r-", lw=1)
    ax.set_xlabel("truth width (px)")
    ax.set_ylabel("measured width (px)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)

"""Synthetic retinal-like test scenes with known geometry.

Vessels are dark bars with Gaussian-smoothed edges: the cross-section is a
box of the nominal width convolved with a Gaussian of ``edge_sigma`` pixels,
so the half-contrast points sit exactly at ``+-width/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

BACKGROUND = 0.7


def bar_profile(distance, width, edge_sigma: float = 1.0):
    """Darkness in [0, 1] at a given distance from the centerline."""
    d = np.asarray(distance, dtype=float)
    s = np.sqrt(2.0) * edge_sigma
    return 0.5 * (erf((d + width / 2) / s) - erf((d - width / 2) / s))


@dataclass
class Vessel:
    """A polyline vessel with per-vertex widths."""

    points: np.ndarray  # (n, 2) as (x, y)
    widths: np.ndarray  # (n,)
    contrast: float = 0.3
    reflex: float = 0.0  # height of a central bright ridge
    reflex_sigma: float = 1.0
    name: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.widths = np.broadcast_to(np.asarray(self.widths, dtype=float), (len(self.points),)).copy()


@dataclass
class Scene:
    image: np.ndarray
    vessels: list
    truth: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = dict(self.truth)
        out["vessels"] = [
            {
                "name": v.name,
                "centerline": np.round(v.points, 6).tolist(),
                "widths": np.round(v.widths, 6).tolist(),
                "contrast": v.contrast,
            }
            for v in self.vessels
        ]
        out["shape"] = list(self.image.shape)
        return out


def _nearest_on_polyline(px, py, vessel: Vessel):
    """Distance to the polyline and the interpolated width at the nearest point."""
    best_d = np.full(px.shape, np.inf)
    best_w = np.zeros(px.shape)
    pts, ws = vessel.points, vessel.widths
    for a, b, wa, wb in zip(pts[:-1], pts[1:], ws[:-1], ws[1:]):
        ab = b - a
        length2 = ab @ ab
        t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / length2, 0, 1)
        d = np.hypot(px - a[0] - t * ab[0], py - a[1] - t * ab[1])
        closer = d < best_d
        best_d = np.where(closer, d, best_d)
        best_w = np.where(closer, wa + t * (wb - wa), best_w)
    return best_d, best_w


def render(shape, vessels, background=BACKGROUND, edge_sigma=1.0, disk=None, noise=0.0, seed=0) -> np.ndarray:
    """Render vessels (darkest wins at overlaps), an optional bright disk and noise.

    ``disk`` is ``(cx, cy, radius, brightness)``.
    """
    rows, cols = shape
    py, px = np.mgrid[0:rows, 0:cols].astype(float)
    image = np.full(shape, float(background))
    if disk is not None:
        cx, cy, radius, brightness = disk
        r = np.hypot(px - cx, py - cy)
        image += brightness * 0.5 * (1 - erf((r - radius) / (np.sqrt(2.0) * 2.0)))
    darkness = np.zeros(shape)
    ridge = np.zeros(shape)
    for v in vessels:
        d, w = _nearest_on_polyline(px, py, v)
        darkness = np.maximum(darkness, v.contrast * bar_profile(d, w, edge_sigma))
        if v.reflex:
            ridge = np.maximum(ridge, v.reflex * np.exp(-0.5 * (d / v.reflex_sigma) ** 2) * (d < w / 2))
    image = image - darkness + ridge
    if noise > 0:
        image = image + np.random.default_rng(seed).normal(0.0, noise, shape)
    return np.clip(image, 0.0, 1.0)


def line(start, angle, length, n=2):
    start = np.asarray(start, dtype=float)
    d = np.array([np.cos(angle), np.sin(angle)])
    return start + np.linspace(0, length, n)[:, None] * d


def straight(shape=(256, 256), width=8.0, contrast=0.3, angle=0.0, offset=0.0, noise=0.0, seed=0) -> Scene:
    """One straight vessel through the image center at ``angle``."""
    rows, cols = shape
    center = np.array([cols / 2, rows / 2]) + offset * np.array([-np.sin(angle), np.cos(angle)])
    span = 2 * np.hypot(rows, cols)
    pts = line(center - span / 2 * np.array([np.cos(angle), np.sin(angle)]), angle, span)
    v = Vessel(pts, width, contrast, name="vessel")
    img = render(shape, [v], noise=noise, seed=seed)
    return Scene(img, [v], {"scene": "straight", "topology": {"segments": 1, "bifurcations": 0, "crossings": 0}})


def crossing(shape=(256, 256), width=8.0, contrast=0.3, angle_deg=60.0, noise=0.0, seed=0) -> Scene:
    """Two straight vessels through the center, the second rotated by ``angle_deg``."""
    rows, cols = shape
    center = np.array([cols / 2, rows / 2])
    span = 2 * np.hypot(rows, cols)
    vessels = []
    for k, ang in enumerate((0.0, np.deg2rad(angle_deg))):
        d = np.array([np.cos(ang), np.sin(ang)])
        vessels.append(Vessel(line(center - span / 2 * d, ang, span), width, contrast, name=f"vessel{k}"))
    img = render(shape, vessels, noise=noise, seed=seed)
    truth = {"scene": "crossing", "crossing_point": center.tolist(),
             "topology": {"segments": 2, "bifurcations": 0, "crossings": 1}}
    return Scene(img, vessels, truth)


def parallel(shape=(256, 256), width=6.0, gap=3.0, contrast=0.3, noise=0.0, seed=0) -> Scene:
    """Two horizontal vessels whose facing edges are ``gap`` pixels apart."""
    rows, cols = shape
    sep = width + gap
    vessels = []
    for k, dy in enumerate((-sep / 2, sep / 2)):
        y = rows / 2 + dy
        vessels.append(Vessel([[-cols, y], [2 * cols, y]], width, contrast, name=f"vessel{k}"))
    img = render(shape, vessels, noise=noise, seed=seed)
    return Scene(img, vessels, {"scene": "parallel", "topology": {"segments": 2, "bifurcations": 0, "crossings": 0}})


def reflex(shape=(256, 256), width=12.0, contrast=0.3, reflex_height=0.15, reflex_sigma=1.2, angle=0.0, noise=0.0, seed=0) -> Scene:
    """Straight vessel with a central light reflex (bright ridge on the axis)."""
    rows, cols = shape
    center = np.array([cols / 2, rows / 2])
    d = np.array([np.cos(angle), np.sin(angle)])
    span = 2 * np.hypot(rows, cols)
    v = Vessel(line(center - span / 2 * d, angle, span), width, contrast, reflex_height, reflex_sigma, name="vessel")
    img = render(shape, [v], noise=noise, seed=seed)
    return Scene(img, [v], {"scene": "reflex", "topology": {"segments": 1, "bifurcations": 0, "crossings": 0}})


def widening(shape=(256, 320), start_width=6.0, end_width=14.0, contrast=0.3, margin=20.0) -> Scene:
    """Horizontal vessel whose width ramps linearly from left to right."""
    rows, cols = shape
    xs = np.linspace(-margin, cols + margin, 50)
    ws = np.interp(xs, [0, cols], [start_width, end_width])
    v = Vessel(np.column_stack([xs, np.full_like(xs, rows / 2)]), ws, contrast, name="vessel")
    img = render(shape, [v])
    return Scene(img, [v], {"scene": "widening", "topology": {"segments": 1, "bifurcations": 0, "crossings": 0}})


def fading(shape=(256, 256), width=8.0, contrast=0.3, fade_start=0.5, fade_end=0.6) -> Scene:
    """Horizontal vessel whose contrast drops to zero between two fractions of the width."""
    rows, cols = shape
    y = rows / 2
    py, px = np.mgrid[0:rows, 0:cols].astype(float)
    gain = np.clip((fade_end * cols - px) / ((fade_end - fade_start) * cols), 0, 1)
    img = BACKGROUND - contrast * gain * bar_profile(py - y, width)
    v = Vessel([[-cols, y], [fade_end * cols, y]], width, contrast, name="vessel")
    truth = {"scene": "fading", "fade_x": [fade_start * cols, fade_end * cols],
             "topology": {"segments": 1, "bifurcations": 0, "crossings": 0}}
    return Scene(np.clip(img, 0, 1), [v], truth)


def branching(shape=(256, 256), width=8.0, branch_width=6.0, branch_angle_deg=45.0, contrast=0.3) -> Scene:
    """Y-phantom: horizontal trunk with one branch leaving at the center."""
    rows, cols = shape
    y = rows / 2
    trunk = Vessel([[-cols, y], [2 * cols, y]], width, contrast, name="trunk")
    ang = -np.deg2rad(branch_angle_deg)
    branch = Vessel(line([cols / 2, y], ang, cols), branch_width, contrast, name="branch")
    img = render(shape, [trunk, branch])
    truth = {"scene": "branching", "branch_point": [cols / 2, y],
             "topology": {"segments": 2, "bifurcations": 1, "crossings": 0}}
    return Scene(img, [trunk, branch], truth)


def disk(shape=(400, 400), center=(200.0, 200.0), radius=60.0, brightness=0.25, bars=6, bar_width=7.0, contrast=0.3) -> Scene:
    """Bright optic-disk phantom, optionally crossed by dark bars through its center."""
    rows, cols = shape
    vessels = []
    span = 2 * np.hypot(rows, cols)
    c = np.asarray(center, dtype=float)
    for k in range(bars):
        ang = np.pi * (k + 0.5) / bars
        d = np.array([np.cos(ang), np.sin(ang)])
        vessels.append(Vessel(line(c - span / 2 * d, ang, span), bar_width, contrast, name=f"bar{k}"))
    img = render(shape, vessels, background=0.45, disk=(c[0], c[1], radius, brightness))
    truth = {"scene": "disk", "disk": {"center": list(c), "radius": radius}}
    return Scene(img, vessels, truth)


# The tree phantom: an optic disk on the left, a trunk leaving it to the
# right, two finite branches leaving the trunk and one vessel crossing the
# trunk beyond the branches (it meets neither branch).
TREE_SHAPE = (384, 384)
TREE_DISK = (64.0, 192.0, 48.0)


def tree(shape=TREE_SHAPE, noise=0.0, seed=0) -> Scene:
    rows, cols = shape
    cx, cy, radius = TREE_DISK
    trunk_y = cy
    trunk = Vessel([[cx, trunk_y], [2 * cols, trunk_y]], 8.0, 0.3, name="trunk")
    b1_start = np.array([150.0, trunk_y])
    b1 = Vessel(line(b1_start, -np.deg2rad(40), 90), 6.0, 0.3, name="branch1")
    b2_start = np.array([215.0, trunk_y])
    b2 = Vessel(line(b2_start, np.deg2rad(40), 80), 6.0, 0.3, name="branch2")
    cross_point = np.array([300.0, trunk_y])
    ang = np.deg2rad(75)
    dvec = np.array([np.cos(ang), np.sin(ang)])
    crosser = Vessel(line(cross_point - 400 * dvec, ang, 800), 7.0, 0.3, name="crossing")
    vessels = [trunk, b1, b2, crosser]
    img = render(shape, vessels, background=0.55, disk=(cx, cy, radius, 0.3), noise=noise, seed=seed)
    truth = {
        "scene": "tree",
        "disk": {"center": [cx, cy], "radius": radius},
        "bifurcation_points": [b1_start.tolist(), b2_start.tolist()],
        "crossing_points": [cross_point.tolist()],
        "topology": {"segments": 5, "bifurcations": 2, "crossings": 1},
    }
    return Scene(img, vessels, truth)


SCENES = {
    "straight": straight,
    "crossing": crossing,
    "parallel": parallel,
    "reflex": reflex,
    "widening": widening,
    "fading": fading,
    "branching": branching,
    "tree": tree,
    "disk": disk,
}

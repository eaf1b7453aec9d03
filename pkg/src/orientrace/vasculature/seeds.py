"""Seed detection on circles around the optic disk, seed initialization
from edge pairs, and the vessel-value threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .. import oscore, spectral
from ..errors import NoSeeds, OutOfBounds
from ..etos import StopPolicy, TrackPoint, vessel_value
from ..oscore import OrientationScore, angle_diff, e_eta, e_xi
from .optic_disk import OpticDisk


@dataclass(frozen=True)
class Seed:
    center: np.ndarray  # (x, y)
    theta: float
    circle: int  # index of the detection circle


@dataclass(frozen=True)
class InitializedSeed:
    point: TrackPoint
    value: float  # vessel value at the initial edges


def vessel_likelihood(score: OrientationScore) -> np.ndarray:
    """``max_theta Re(-U)``: high on dark elongated structures."""
    return np.max(-np.real(score.data), axis=0)


def _circle_local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of circular local maxima (plateaus counted once)."""
    n = len(values)
    out = []
    for i in range(n):
        prev_i = (i - 1) % n
        if values[i] <= values[prev_i]:
            continue
        j = (i + 1) % n
        steps = 0
        while values[j] == values[i] and steps < n:
            j = (j + 1) % n
            steps += 1
        if values[j] < values[i]:
            out.append(i)
    return np.array(out, dtype=int)


def detect_seeds(likelihood: np.ndarray, score: OrientationScore, disk: OpticDisk,
                 radii=(1.0, 1.5), dedup_width: float | None = None, dedup_angle: float = np.deg2rad(15)) -> list[Seed]:
    """Local maxima of the likelihood on circles around the disk.

    Each circle is sampled at 1 degree steps; maxima at or below the circle
    mean are discarded. The seed orientation is the orientation of largest
    score modulus, flipped to point away from the disk. Seeds on an outer
    circle that lie within ``dedup_width`` of the line of an inner seed with
    an orientation within ``dedup_angle`` are dropped.
    """
    cx, cy = disk.center
    angles = np.deg2rad(np.arange(360))
    seeds = []
    for k, factor in enumerate(radii):
        r = factor * disk.radius
        xs = cx + r * np.cos(angles)
        ys = cy + r * np.sin(angles)
        ok = oscore.inside(score, xs, ys)
        vals = np.full(360, -np.inf)
        vals[ok] = ndimage.map_coordinates(likelihood, [ys[ok], xs[ok]], order=1)
        finite = vals[np.isfinite(vals)]
        if finite.size == 0 or np.ptp(finite) <= 1e-12 * max(np.abs(finite).max(), 1e-300):
            continue
        mean = finite.mean()
        for i in _circle_local_maxima(vals):
            if not vals[i] > mean:
                continue
            c = np.array([xs[i], ys[i]])
            col = np.abs(oscore.orientation_column(score, *c))
            j = int(np.argmax(col))
            n = len(col)
            ym, y0, yp = col[(j - 1) % n], col[j], col[(j + 1) % n]
            denom = ym - 2 * y0 + yp
            off = 0.0 if denom == 0 else float(np.clip(0.5 * (ym - yp) / denom, -0.5, 0.5))
            theta = score.thetas[j] + off * score.dtheta
            if np.dot(e_xi(theta), c - np.array([cx, cy])) < 0:
                theta += np.pi
            seeds.append(Seed(c, float(np.mod(theta, 2 * np.pi)), k))
    width = dedup_width if dedup_width is not None else 0.0
    kept = []
    for s in seeds:
        duplicate = False
        for t in kept:
            if t.circle == s.circle:
                continue
            lateral = abs(np.dot(s.center - t.center, e_eta(t.theta)))
            if lateral < width and abs(angle_diff(s.theta, t.theta)) < dedup_angle:
                duplicate = True
                break
        if not duplicate:
            kept.append(s)
    return kept


@dataclass(frozen=True)
class EdgeScan:
    eta: np.ndarray
    edge: np.ndarray  # Im of the score along the scan line


def _scan(score, c0, theta0, half_width, spacing=0.5):
    n = int(math.ceil(half_width / spacing))
    eta = np.arange(-n, n + 1) * spacing
    pts = np.asarray(c0, float)[None, :] + eta[:, None] * e_eta(theta0)[None, :]
    ok = oscore.inside(score, pts[:, 0], pts[:, 1])
    prof = np.zeros(eta.size)
    prof[ok] = np.imag(oscore.sample(score, pts[ok, 0], pts[ok, 1], theta0))
    return EdgeScan(eta, prof), pts


def pair_score(score, u, v, theta0, c0, mean_width) -> float:
    """Vessel value of an edge pair damped by the distance of its midpoint to ``c0``."""
    mid = (np.asarray(u) + np.asarray(v)) / 2
    d2 = float(np.sum((mid - np.asarray(c0)) ** 2))
    return vessel_value(score, u, v, theta0) * math.exp(-0.5 * d2 / (0.5 * mean_width) ** 2)


def _refine(values, idx, sign):
    if idx <= 0 or idx >= len(values) - 1:
        return float(idx)
    ym, y0, yp = sign * values[idx - 1], sign * values[idx], sign * values[idx + 1]
    denom = ym - 2 * y0 + yp
    return idx + (0.0 if denom == 0 else float(np.clip(0.5 * (ym - yp) / denom, -0.5, 0.5)))


def initial_edges(score: OrientationScore, c0, theta0: float, mean_width: float, half_width: float | None = None):
    """Edge pair ``(u0, v0)`` for a seed, or ``None`` when no pair exists.

    Candidate left edges are minima and right edges maxima of ``Im U`` on the
    line through ``c0`` perpendicular to ``theta0``. The best pair by
    :func:`pair_score` defines the main patch; adjacent patches closer than
    its width are merged. All edges of the merged patch are followed in 1-D
    scale space up to the first annihilation inside it, and the outer edges
    with the strongest response at that scale are returned.
    """
    half_width = half_width or max(3.0 * mean_width, 10.0)
    scan, _ = _scan(score, c0, theta0, half_width)
    eta, prof = scan.eta, scan.edge
    h = eta[1] - eta[0]
    maxima, minima = spectral.local_extrema(prof)
    lefts = [i for i in minima if prof[i] < 0]
    rights = [i for i in maxima if prof[i] > 0]
    c0 = np.asarray(c0, float)
    n = e_eta(theta0)

    def point(idx):
        return c0 + float(eta[0] + idx * h) * n

    best, best_pair = -np.inf, None
    pairs = []
    for i in lefts:
        for j in rights:
            if j <= i:
                continue
            try:
                s = pair_score(score, point(i), point(j), theta0, c0, mean_width)
            except OutOfBounds:
                continue
            pairs.append((i, j))
            if s > best:
                best, best_pair = s, (i, j)
    if best_pair is None or not best > 0:
        return None
    lo, hi = best_pair
    width_idx = hi - lo
    # merge adjacent patches (left edge followed by right edge) that are close
    changed = True
    while changed:
        changed = False
        for i, j in pairs:
            adjacent = not any(lo <= k <= hi for k in (i, j)) and (
                (j < lo and _is_patch(prof, i, j, lefts, rights)) or (i > hi and _is_patch(prof, i, j, lefts, rights)))
            if not adjacent:
                continue
            gap = lo - j if j < lo else i - hi
            if gap < width_idx:
                lo, hi = min(lo, i), max(hi, j)
                changed = True
    ss = spectral.scale_space_1d(prof)
    tracks = [t for t in spectral.track_extrema(ss) if lo <= t.positions[0] <= hi]
    inner_ends = [t.end_level for t in tracks if t.end_level < len(ss.scales) - 1]
    level = min(inner_ends) if inner_ends else 0
    alive = [t for t in tracks if t.end_level >= level]
    at_level = ss.levels[level]
    mins = [t for t in alive if t.kind == "min" and at_level[int(t.positions[level])] < 0]
    maxs = [t for t in alive if t.kind == "max" and at_level[int(t.positions[level])] > 0]
    if not mins or not maxs:
        return None
    left = max(mins, key=lambda t: (-at_level[int(t.positions[level])], -t.positions[0]))
    right = max(maxs, key=lambda t: (at_level[int(t.positions[level])], t.positions[0]))
    li, ri = int(left.positions[0]), int(right.positions[0])
    if ri <= li:
        return None
    u = point(_refine(prof, li, -1.0))
    v = point(_refine(prof, ri, 1.0))
    return TrackPoint.from_edges(u, v, theta0)


def _is_patch(prof, i, j, lefts, rights) -> bool:
    """A left edge directly followed by a right edge with no other edge between."""
    return j > i and not any(i < k < j for k in lefts) and not any(i < k < j for k in rights)


def seed_threshold(values) -> float:
    """Half of the mean vessel value over initialized seeds."""
    values = list(values)
    if not values:
        raise NoSeeds("no initialized seeds")
    return 0.5 * float(np.mean(values))


def stop_policy(mask, pixel_map, mean_width: float, threshold: float, step: float, value_score=None) -> StopPolicy:
    """Stopping criteria for model building: mask exit, sustained overlap, low vessel value."""
    return StopPolicy(mask=mask, pixel_map=pixel_map, overlap_steps=overlap_steps(mean_width, step),
                      threshold=threshold, value_score=value_score)


def overlap_steps(mean_width: float, step: float) -> int:
    return int(math.ceil(4.0 * mean_width / step - 1e-9))

"""Junction candidates from orientation columns along a track, their
clustering into drafts, and crossing/bifurcation classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .. import completion, oscore
from ..errors import OutOfBounds
from ..oscore import OrientationScore, angle_diff, e_xi

CROSSING = "crossing"
BIFURCATION = "bifurcation"


@dataclass(frozen=True)
class JunctionParams:
    prominence: float = 0.3  # extra maximum vs. along-vessel lobe height
    lobe_tolerance: float = np.deg2rad(30)
    histogram_bins: int = 18
    partner_radius: float = 3.0  # in mean widths
    cost_ratio: float = 1.25  # SR length vs. straight-line length
    width_tolerance: float = 0.3
    duplicate_angle: float = np.deg2rad(30)
    transversal_angle: float = np.deg2rad(60)


@dataclass(frozen=True)
class Candidate:
    position: np.ndarray
    theta: float
    side: str  # "left" or "right"
    step: int


@dataclass
class Draft:
    position: np.ndarray
    theta: float
    side: str
    step: int
    seed: object = None  # TrackPoint once initialized
    value: float = 0.0
    kind: str | None = None
    partner: "Draft | None" = None


@dataclass
class Junction:
    position: np.ndarray
    theta: float
    kind: str
    segment_ids: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"x": float(self.position[0]), "y": float(self.position[1]), "theta": float(self.theta),
                "kind": self.kind, "segment_ids": [int(i) for i in self.segment_ids]}


def _circular_peaks(values: np.ndarray):
    """Circular local maxima with their topographic prominence."""
    n = len(values)
    peaks = []
    for i in range(n):
        if not (values[i] > values[(i - 1) % n] and values[i] >= values[(i + 1) % n]):
            continue
        # walk both ways until a higher value; prominence is height above the higher saddle
        saddles = []
        for direction in (-1, 1):
            low = values[i]
            j = i
            for _ in range(n - 1):
                j = (j + direction) % n
                if values[j] > values[i]:
                    break
                low = min(low, values[j])
            saddles.append(low)
        peaks.append((i, values[i] - max(saddles)))
    return peaks


def column_candidates(column: np.ndarray, thetas: np.ndarray, theta: float, side: str, params: JunctionParams):
    """Extra maxima of ``|column|`` between the two along-vessel lobes on the given side.

    The lobes are the strongest maxima within ``lobe_tolerance`` of ``theta``
    and of ``theta + pi``. On the left edge the side half-circle is
    ``theta - (0, pi)``, on the right edge ``theta + (0, pi)``.
    """
    mod = np.abs(column)
    peaks = _circular_peaks(mod)
    if not peaks:
        return []
    fwd = [(i, p) for i, p in peaks if abs(angle_diff(thetas[i], theta)) <= params.lobe_tolerance]
    bwd = [(i, p) for i, p in peaks if abs(angle_diff(thetas[i], theta + np.pi)) <= params.lobe_tolerance]
    if not fwd or not bwd:
        return []
    lobe = 0.5 * (max(mod[i] for i, _ in fwd) + max(mod[i] for i, _ in bwd))
    sign = -1.0 if side == "left" else 1.0
    out = []
    for i, prom in peaks:
        rel = sign * angle_diff(thetas[i], theta)
        if not (params.lobe_tolerance < rel < np.pi - params.lobe_tolerance):
            continue
        if prom > params.prominence * lobe:
            n = len(mod)
            ym, y0, yp = mod[(i - 1) % n], mod[i], mod[(i + 1) % n]
            denom = ym - 2 * y0 + yp
            off = 0.0 if denom == 0 else float(np.clip(0.5 * (ym - yp) / denom, -0.5, 0.5))
            out.append(float(np.mod(thetas[i] + off * (thetas[1] - thetas[0]), 2 * np.pi)))
    return out


def detect_junction_candidates(score_plus: OrientationScore, points, params: JunctionParams = JunctionParams()) -> list[Candidate]:
    """Scan the forward score's orientation columns at every left and right edge of a track."""
    out = []
    for k, p in enumerate(points):
        for side, pos in (("left", p.u), ("right", p.v)):
            try:
                col = oscore.orientation_column(score_plus, *pos)
            except OutOfBounds:
                continue
            for theta in column_candidates(col, score_plus.thetas, p.theta, side, params):
                out.append(Candidate(np.asarray(pos, float), theta, side, k))
    return out


def cluster_junctions(candidates, mean_width: float, params: JunctionParams = JunctionParams()) -> list[Draft]:
    """Group candidates by position (single linkage, threshold ``mean_width``), then by orientation.

    Each cluster gets a circular orientation histogram; every histogram mode
    yields one draft at the mean position of its candidates with the modal
    orientation (bin center).
    """
    if not candidates:
        return []
    pos = np.array([c.position for c in candidates])
    if len(candidates) == 1:
        labels = np.array([1])
    else:
        labels = fcluster(linkage(pos, method="single"), t=mean_width, criterion="distance")
    nbins = params.histogram_bins
    width = 2 * np.pi / nbins
    drafts = []
    for lab in sorted(set(labels), key=lambda l: min(c.step for c, m in zip(candidates, labels) if m == l)):
        members = [c for c, m in zip(candidates, labels) if m == lab]
        bins = np.array([int(np.floor(np.mod(c.theta, 2 * np.pi) / width)) % nbins for c in members])
        hist = np.bincount(bins, minlength=nbins)
        modes = [b for b in range(nbins)
                 if hist[b] > 0 and hist[b] >= hist[(b - 1) % nbins] and hist[b] > hist[(b + 1) % nbins]]
        for b in modes:
            # the mode absorbs its neighbouring bins
            near = [c for c, cb in zip(members, bins) if min((cb - b) % nbins, (b - cb) % nbins) <= 1]
            sides = [c.side for c in near]
            drafts.append(Draft(
                position=np.mean([c.position for c in near], axis=0),
                theta=float((b + 0.5) * width),
                side=max(set(sides), key=lambda s: (sides.count(s), s)),
                step=min(c.step for c in near),
            ))
    return sorted(drafts, key=lambda d: (d.step, d.theta))


def connection_cost(a: Draft, b: Draft, beta: float) -> float:
    """SR length of the curve entering the host at ``a`` and leaving at ``b``."""
    pa = a.seed.c if a.seed is not None else a.position
    pb = b.seed.c if b.seed is not None else b.position
    return completion.connection_cost((pa[0], pa[1], a.theta + np.pi), (pb[0], pb[1], b.theta), beta)


def classify_junction(draft: Draft, others, mean_width: float, beta: float | None = None,
                      params: JunctionParams = JunctionParams()) -> str:
    """``crossing`` when a partner across the host continues the draft cheaply with a similar width.

    Partners are other drafts on the opposite side within ``partner_radius``
    mean widths. The connection cost is the sub-Riemannian length of the
    Hermite cubic between the reversed draft and the partner; it must stay
    below ``cost_ratio`` times the straight-line cost ``beta * distance``.
    Sets ``draft.partner`` on success.
    """
    beta = beta if beta is not None else 1.0 / mean_width
    best = None
    for other in others:
        if other is draft or other.side == draft.side:
            continue
        pa = draft.seed.c if draft.seed is not None else draft.position
        pb = other.seed.c if other.seed is not None else other.position
        dist = float(np.linalg.norm(pb - pa))
        if dist > params.partner_radius * mean_width + 2 * mean_width or dist == 0:
            continue
        cost = connection_cost(draft, other, beta)
        if not np.isfinite(cost) or cost > params.cost_ratio * beta * dist:
            continue
        if draft.seed is not None and other.seed is not None:
            wa, wb = draft.seed.w, other.seed.w
            if abs(wa - wb) > params.width_tolerance * max(wa, wb):
                continue
        if best is None or cost < best[0]:
            best = (cost, other)
    if best is None:
        return BIFURCATION
    draft.partner = best[1]
    return CROSSING


def segment_direction_at(points, position):
    """Orientation, width and index of the track point nearest to ``position``."""
    centers = np.array([p.c for p in points])
    k = int(np.argmin(np.sum((centers - np.asarray(position)) ** 2, axis=1)))
    return points[k].theta, points[k].w, k


def resolve_overlap(new_points, established_points, params: JunctionParams = JunctionParams()) -> str:
    """Decide how a track that ran into an established segment is resolved.

    Returns ``"duplicate"`` (similar width and direction), ``"crossing"``
    (similar width, transversal) or ``"bifurcation"`` otherwise.
    """
    last = new_points[-1]
    theta, width, _ = segment_direction_at(established_points, last.c)
    similar_width = abs(last.w - width) <= params.width_tolerance * max(last.w, width)
    # undirected angle between the two vessels
    angle = abs(angle_diff(2 * last.theta, 2 * theta)) / 2
    if similar_width and angle <= params.duplicate_angle:
        return "duplicate"
    if similar_width and angle > params.transversal_angle:
        return CROSSING
    return BIFURCATION


def seed_position(draft: Draft, mean_width: float) -> np.ndarray:
    """Point one mean width out of the host along the draft orientation."""
    return np.asarray(draft.position, float) + mean_width * e_xi(draft.theta)

"""Whole-vasculature model building and feature extraction."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .. import oscore, wavelets
from ..errors import LowConfidence, NoSeeds, OutOfBounds
from ..etos import EtosParams, TrackPoint, VesselSegment, etos_track, vessel_value
from ..oscore import angle_diff, e_xi
from . import junctions as J
from . import seeds as S
from .optic_disk import DiskParams, OpticDisk, avg_caliber, detect_optic_disk, require_confident


@dataclass(frozen=True)
class VasculatureParams:
    cake: wavelets.CakeParams = wavelets.CakeParams()
    etos: EtosParams = EtosParams()
    disk: DiskParams = DiskParams()
    junction: J.JunctionParams = J.JunctionParams()
    seed_radii: tuple = (1.0, 1.5)
    seed_dedup_angle: float = np.deg2rad(15)
    min_segment_length: float = 2.0  # in mean widths
    border: float = 1.0  # excluded image margin, in mean widths
    disk_exclusion: float = 1.5  # drafts closer to the disk center than this many radii (+ one width) are dropped
    threads: int | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("threads")
        return _plain(out)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    return value


@dataclass
class VasculatureModel:
    optic_disk: OpticDisk | None
    segments: list
    junctions: list
    mean_width: float
    threshold: float
    params: dict = field(default_factory=dict)
    log: list = field(default_factory=list)
    pixel_map: np.ndarray | None = None

    def segment(self, seg_id: int) -> VesselSegment:
        for s in self.segments:
            if s.id == seg_id:
                return s
        raise KeyError(seg_id)

    def counts(self) -> dict:
        return {
            "segments": len(self.segments),
            "bifurcations": sum(j.kind == J.BIFURCATION for j in self.junctions),
            "crossings": sum(j.kind == J.CROSSING for j in self.junctions),
        }

    def check(self):
        """Assert the structural invariants: unique ids, existing parents, acyclic parents, valid junctions."""
        ids = [s.id for s in self.segments]
        assert len(ids) == len(set(ids)), "segment ids not unique"
        parent = {s.id: s.parent_id for s in self.segments}
        for s in self.segments:
            assert s.parent_id is None or s.parent_id in parent, f"segment {s.id} has a missing parent"
            seen, cur = set(), s.id
            while cur is not None:
                assert cur not in seen, "cycle in parent links"
                seen.add(cur)
                cur = parent[cur]
        for j in self.junctions:
            assert all(i in parent for i in j.segment_ids), "junction references a missing segment"
            if j.kind == J.CROSSING:
                assert len(j.segment_ids) == 2, "crossing must reference two segments"


def paint_segment(label_map: np.ndarray, points, label: int) -> None:
    """Fill the quadrilaterals between consecutive edge pairs with ``label``."""
    rows, cols = label_map.shape
    canvas = Image.new("I", (cols, rows), 0)
    draw = ImageDraw.Draw(canvas)
    for a, b in zip(points[:-1], points[1:]):
        quad = [tuple(a.u), tuple(b.u), tuple(b.v), tuple(a.v)]
        draw.polygon([(float(x), float(y)) for x, y in quad], fill=1, outline=1)
    filled = np.asarray(canvas, dtype=np.int32) > 0
    label_map[filled & (label_map == 0)] = label


def arc_length(points) -> np.ndarray:
    c = np.array([p.c for p in points]) if points else np.zeros((0, 2))
    if len(c) < 2:
        return np.zeros(len(c))
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(c, axis=0), axis=1))])


@dataclass
class _Task:
    seed: TrackPoint
    parent_id: int | None = None
    junction: J.Junction | None = None  # registered with the new segment once tracked
    origin: str = "disk"


class _Builder:
    def __init__(self, shape, score, score_plus, mask, disk, mean_width, threshold, params: VasculatureParams):
        self.score = score
        self.score_plus = score_plus
        self.mask = mask
        self.disk = disk
        self.mean_width = mean_width
        self.threshold = threshold
        self.params = params
        self.labels = np.zeros(shape, dtype=np.int32)
        self.segments: list[VesselSegment] = []
        self.junctions: list[J.Junction] = []
        self.log: list[str] = []
        self.queue: deque[_Task] = deque()

    def covered(self, point) -> int:
        x, y = int(round(point[0])), int(round(point[1]))
        rows, cols = self.labels.shape
        if not (0 <= x < cols and 0 <= y < rows):
            return 0
        return int(self.labels[y, x])

    def inside(self, point) -> bool:
        x, y = int(round(point[0])), int(round(point[1]))
        rows, cols = self.mask.shape
        return 0 <= x < cols and 0 <= y < rows and bool(self.mask[y, x])

    def run(self):
        while self.queue:
            self.process(self.queue.popleft())

    def process(self, task: _Task):
        new_id = len(self.segments)
        if self.covered(task.seed.c):
            self.log.append(f"skip {task.origin} seed at ({task.seed.c[0]:.1f}, {task.seed.c[1]:.1f}): already covered")
            return
        stop = S.stop_policy(self.mask, self.labels, self.mean_width, self.threshold, self.params.etos.step, self.score)
        seg = etos_track(self.score_plus, task.seed, self.params.etos, stop, new_id, task.parent_id)
        if seg.stop_reason == "overlap":
            self.resolve(seg)
        if arc_length(seg.points)[-1] < self.params.min_segment_length * self.mean_width:
            self.log.append(f"drop {task.origin} track from ({task.seed.c[0]:.1f}, {task.seed.c[1]:.1f}): too short")
            return
        self.segments.append(seg)
        paint_segment(self.labels, seg.points, new_id + 1)
        if task.junction is not None:
            task.junction.segment_ids.append(new_id)
            self.junctions.append(task.junction)
            self.log.append(f"{task.junction.kind} between segments {task.junction.segment_ids}")
        self.queue_drafts(seg)

    def resolve(self, seg: VesselSegment):
        """Handle a track that ran into an established segment."""
        tail = seg.points[-1]
        host_id = self.covered(tail.c) - 1
        if host_id < 0:
            return
        host = self.segments[host_id]
        kind = J.resolve_overlap(seg.points, host.points, self.params.junction)
        # drop the overlapping run
        while len(seg.points) > 1 and self.covered(seg.points[-1].c) == host_id + 1:
            seg.points.pop()
        if kind == "duplicate":
            seg.stop_reason = "duplicate"
            self.log.append(f"track duplicates segment {host_id}: overlapping tail discarded")
            return
        junction = J.Junction(tail.c.copy(), float(tail.theta), kind, [host_id, seg.id])
        self.junctions.append(junction)
        self.log.append(f"{kind} between segments {[host_id, seg.id]} at overlap")
        seg.stop_reason = f"junction ({kind})"
        if kind == J.CROSSING:
            far = tail.c + e_xi(tail.theta) * self.mean_width
            for _ in range(20):
                if self.covered(far) != host_id + 1:
                    break
                far = far + e_xi(tail.theta) * self.mean_width / 2
            far = far + e_xi(tail.theta) * self.mean_width
            seed = S.initial_edges(self.score, far, tail.theta, self.mean_width)
            if seed is not None:
                self.queue.append(_Task(seed, seg.id, None, "far side"))

    def validate_draft(self, draft: J.Draft) -> bool:
        start = J.seed_position(draft, self.mean_width)
        if not self.inside(start) or self.covered(start):
            return False
        if self.disk is not None:
            limit = self.params.disk_exclusion * self.disk.radius + self.mean_width
            if np.linalg.norm(start - np.asarray(self.disk.center)) < limit:
                return False
        seed = S.initial_edges(self.score, start, draft.theta, self.mean_width)
        if seed is None or self.covered(seed.c) or not self.inside(seed.c):
            return False
        try:
            value = vessel_value(self.score, seed.u, seed.v, seed.theta)
        except OutOfBounds:
            return False
        if value < self.threshold:
            return False
        draft.seed, draft.value = seed, value
        return True

    def queue_drafts(self, host: VesselSegment):
        cands = J.detect_junction_candidates(self.score_plus, host.points, self.params.junction)
        drafts = [d for d in J.cluster_junctions(cands, self.mean_width, self.params.junction) if self.validate_draft(d)]
        used = set()
        for d in drafts:
            if id(d) in used:
                continue
            kind = J.classify_junction(d, [o for o in drafts if id(o) not in used], self.mean_width,
                                       params=self.params.junction)
            used.add(id(d))
            if kind == J.CROSSING:
                used.add(id(d.partner))
                where = 0.5 * (d.position + d.partner.position)
                self.queue.append(_Task(d.seed, host.id, None, "crossing arm"))
                through = TrackPoint.from_edges(d.seed.v, d.seed.u, d.seed.theta + np.pi)
                junction = J.Junction(where, float(np.mod(d.theta + np.pi, 2 * np.pi)), J.CROSSING, [host.id])
                self.queue.append(_Task(through, host.id, junction, "crossing"))
            else:
                junction = J.Junction(d.position.copy(), d.theta, J.BIFURCATION, [host.id])
                self.queue.append(_Task(d.seed, host.id, junction, "branch"))


def _gray(image) -> np.ndarray:
    arr = np.asarray(getattr(image, "data", image), dtype=float)
    if arr.ndim == 3:
        # green carries the best vessel contrast in fundus images
        return arr[..., 1]
    return arr


def compute_scores(gray: np.ndarray, mask: np.ndarray, params: VasculatureParams):
    """Double-sided and forward cake scores of the image with the masked mean removed."""
    f = np.where(mask, gray - gray[mask].mean(), 0.0)
    f = f - f.mean()
    stack = wavelets.build_cake_stack(params.cake, gray.shape)
    plus, _ = wavelets.split_directional(stack)
    return oscore.transform(f, stack, params.threads), oscore.transform(f, plus, params.threads)


def build_vasculature(image, mask=None, params: VasculatureParams = VasculatureParams(), seeds=None) -> VasculatureModel:
    """Detect the disk, seed, track and follow junctions until the queue is empty.

    ``image`` is a 2-D array, an RGB array or an :class:`~orientrace.raster.Image2D`.
    ``seeds``, when given, is a list of :class:`~orientrace.etos.TrackPoint`
    that replaces disk-based seeding; the disk is then optional.
    """
    gray = _gray(image)
    if mask is None:
        mask = getattr(image, "mask", None)
    mask = np.ones(gray.shape, bool) if mask is None else np.asarray(mask, bool)
    disk = detect_optic_disk(image, mask, params.disk)
    if seeds is None:
        require_confident(disk, params.disk)
        mean_width = avg_caliber(disk.radius)
    else:
        if disk.confidence < params.disk.min_confidence:
            disk = None
        mean_width = float(np.mean([s.w for s in seeds])) if seeds else (avg_caliber(disk.radius) if disk else 1.0)
    border = max(int(math.ceil(params.border * mean_width)), 1)
    track_mask = ndimage.binary_erosion(mask, iterations=border, border_value=0)

    score, score_plus = compute_scores(gray, mask, params)
    if seeds is None:
        likelihood = S.vessel_likelihood(score)
        found = S.detect_seeds(likelihood, score, disk, params.seed_radii, mean_width, params.seed_dedup_angle)
        seeds = [p for p in (S.initial_edges(score, s.center, s.theta, mean_width) for s in found) if p is not None]
    initialized = []
    for p in seeds:
        try:
            initialized.append((p, vessel_value(score, p.u, p.v, p.theta)))
        except OutOfBounds:
            continue
    if not initialized:
        raise NoSeeds("no vessel seeds found")
    threshold = S.seed_threshold([v for _, v in initialized])

    builder = _Builder(gray.shape, score, score_plus, track_mask, disk, mean_width, threshold, params)
    for p, value in initialized:
        if value >= threshold:
            builder.queue.append(_Task(p))
        else:
            builder.log.append(f"discard seed at ({p.c[0]:.1f}, {p.c[1]:.1f}): vessel value {value:.4g} below threshold")
    builder.run()
    model = VasculatureModel(disk, builder.segments, builder.junctions, mean_width, threshold,
                             params.to_json(), builder.log, builder.labels)
    model.check()
    return model


# --------------------------------------------------------------------------
# features


def _interior_overlaps(model: VasculatureModel):
    """Pairs of segments whose centerline interiors run through each other's footprint."""
    pairs = set()
    if model.pixel_map is None:
        return pairs
    rows, cols = model.pixel_map.shape
    for seg in model.segments:
        own = np.zeros((rows, cols), np.int32)
        paint_segment(own, seg.points, 1)
        for other in model.segments:
            if other.id == seg.id:
                continue
            s = arc_length(other.points)
            if len(s) < 3:
                continue
            interior = (s > model.mean_width) & (s < s[-1] - model.mean_width)
            for p, keep in zip(other.points, interior):
                x, y = int(round(p.c[0])), int(round(p.c[1]))
                if keep and 0 <= x < cols and 0 <= y < rows and own[y, x]:
                    pairs.add(tuple(sorted((seg.id, other.id))))
                    break
    return pairs


def _mean_curvature(points) -> float:
    if len(points) < 3:
        return 0.0
    c = np.array([p.c for p in points])
    a, b, d = c[:-2], c[1:-1], c[2:]
    ab = np.linalg.norm(b - a, axis=1)
    bd = np.linalg.norm(d - b, axis=1)
    da = np.linalg.norm(a - d, axis=1)
    cross = (b[:, 0] - a[:, 0]) * (d[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (d[:, 0] - a[:, 0])
    denom = ab * bd * da
    kappa = np.where(denom > 0, 2 * np.abs(cross) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(kappa.mean())


def model_features(model: VasculatureModel) -> dict:
    """Feature tables: per-point distance to the disk, junctions, per-segment summaries.

    Distances run along the tree and start at the disk boundary: a root
    segment starts at the distance of its first center to the boundary; a
    child continues from the distance at the nearest point of its parent.
    """
    points_table, segment_table = [], []
    start_distance: dict[int, np.ndarray] = {}
    order = sorted(model.segments, key=lambda s: s.id)
    for seg in order:
        s = arc_length(seg.points)
        if seg.parent_id is not None and seg.parent_id in start_distance and seg.points:
            parent = model.segment(seg.parent_id)
            pc = np.array([p.c for p in parent.points])
            d = np.linalg.norm(pc - seg.points[0].c, axis=1)
            k = int(np.argmin(d))
            offset = start_distance[seg.parent_id][k] + d[k]
        elif model.optic_disk is not None and seg.points:
            center = np.asarray(model.optic_disk.center)
            offset = max(np.linalg.norm(seg.points[0].c - center) - model.optic_disk.radius, 0.0)
        else:
            offset = 0.0
        dist = offset + s
        start_distance[seg.id] = dist
        for k, (p, dd) in enumerate(zip(seg.points, dist)):
            points_table.append({"segment_id": seg.id, "index": k, "x": float(p.c[0]), "y": float(p.c[1]),
                                 "theta": float(p.theta), "width": float(p.w), "disk_distance": float(dd)})
        segment_table.append({
            "segment_id": seg.id,
            "parent_id": seg.parent_id,
            "length": float(s[-1]) if len(s) else 0.0,
            "mean_width": float(np.mean([p.w for p in seg.points])) if seg.points else 0.0,
            "mean_curvature": _mean_curvature(seg.points),
            "stop_reason": seg.stop_reason,
        })
    junction_table = [j.to_json() for j in model.junctions]
    overlaps = sorted(_interior_overlaps(model))
    return {
        "points": points_table,
        "segments": segment_table,
        "junctions": junction_table,
        "overlapping_pairs": [list(p) for p in overlaps],
        "crossing_count": len(overlaps),
    }

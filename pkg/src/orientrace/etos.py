"""Paired-edge vessel tracking in the orientation score (ETOS).

Each step predicts the next center along the current orientation, reads
the score on a line perpendicular to it, aligns a two-lobed edge envelope
with the imaginary (edge) response, picks the left and right edges, and
re-estimates the orientation from the responses at both edges.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import oscore
from .errors import OutOfBounds, SeedError
from .oscore import OrientationScore, angle_diff, e_eta, e_xi


@dataclass(frozen=True)
class EtosParams:
    step: float = 2.0
    eta_max: float = 20.0
    envelope_sigma: float = 3.0
    history: int = 10
    max_steps: int = 1000
    eta_spacing: float = 0.5
    shift_spacing: float = 0.25

    def __post_init__(self):
        if self.step <= 0 or self.eta_max <= 0 or self.envelope_sigma <= 0 or self.history < 1:
            raise ValueError("step, eta_max, envelope_sigma must be positive and history >= 1")


@dataclass(frozen=True)
class TrackPoint:
    """Vessel cross-section: center, left/right edge, orientation and width."""

    c: np.ndarray
    u: np.ndarray
    v: np.ndarray
    theta: float
    w: float

    @classmethod
    def from_edges(cls, u, v, theta: float) -> "TrackPoint":
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return cls((u + v) / 2, u, v, float(np.mod(theta, 2 * np.pi)), float(np.linalg.norm(u - v)))

    @classmethod
    def from_center(cls, c, theta: float, width: float) -> "TrackPoint":
        """Seed from a center and width: the left edge lies at negative ``eta``."""
        c = np.asarray(c, dtype=float)
        n = e_eta(theta)
        return cls.from_edges(c - width / 2 * n, c + width / 2 * n, theta)


@dataclass
class TrackState:
    points: list = field(default_factory=list)
    history: deque = field(default_factory=deque)
    step: int = 0
    stop_reason: str | None = None
    flags: list = field(default_factory=list)
    overlap_run: int = 0

    @classmethod
    def start(cls, seed: TrackPoint, params: EtosParams) -> "TrackState":
        state = cls(history=deque(maxlen=params.history))
        state.push(seed)
        return state

    def push(self, point: TrackPoint):
        self.points.append(point)
        self.history.append(point)

    @property
    def last(self) -> TrackPoint:
        return self.history[-1]

    def mean_width(self) -> float:
        return float(np.mean([p.w for p in self.history]))


@dataclass
class VesselSegment:
    id: int
    points: list
    stop_reason: str | None
    parent_id: int | None = None
    flags: list = field(default_factory=list)


class Boundary(Exception):
    """The scan line left the score grid."""


class StopPolicy:
    """Stopping criteria evaluated after every step.

    Parameters
    ----------
    mask : bool array, optional
        Region of interest; leaving it stops the track ("boundary").
    pixel_map : bool array, optional
        Pixels already covered by other segments; staying inside it for
        ``overlap_steps`` consecutive steps stops the track ("overlap").
    threshold : float, optional
        Minimum vessel value; falling below it stops the track
        ("low vessel value").
    """

    def __init__(self, mask=None, pixel_map=None, overlap_steps=None, threshold=None, value_score=None):
        self.mask = mask
        self.pixel_map = pixel_map
        self.overlap_steps = overlap_steps
        self.threshold = threshold
        self.value_score = value_score

    def check(self, score: OrientationScore, state: TrackState, point: TrackPoint) -> str | None:
        x, y = point.c
        rows, cols = score.shape
        if not (0 <= x <= cols - 1 and 0 <= y <= rows - 1):
            return "boundary"
        ix, iy = int(round(x)), int(round(y))
        if self.mask is not None and not self.mask[iy, ix]:
            return "boundary"
        if self.threshold is not None:
            try:
                nu = vessel_value(self.value_score or score, point.u, point.v, point.theta)
            except OutOfBounds:
                return "boundary"
            if nu < self.threshold:
                return "low vessel value"
        if self.pixel_map is not None and self.overlap_steps:
            if self.pixel_map[iy, ix]:
                state.overlap_run += 1
                if state.overlap_run >= self.overlap_steps:
                    return "overlap"
            else:
                state.overlap_run = 0
        return None


def vessel_value(score: OrientationScore, u, v, theta: float, n: int = 32) -> float:
    """Mean modulus of the score along the chord from ``u`` to ``v`` at orientation ``theta``.

    Composite trapezoid rule on ``n`` samples.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    t = np.linspace(0.0, 1.0, n)
    pts = u[None, :] + t[:, None] * (v - u)[None, :]
    vals = np.abs(oscore.sample(score, pts[:, 0], pts[:, 1], theta))
    return float(integrate.trapezoid(vals, t))


def estimate_center(state: TrackState, params: EtosParams) -> np.ndarray:
    last = state.last
    return last.c + params.step * e_xi(last.theta)


def eta_grid(params: EtosParams) -> np.ndarray:
    n = int(round(params.eta_max / params.eta_spacing))
    return np.arange(-n, n + 1) * params.eta_spacing


def scan_profile(score: OrientationScore, center, theta: float, params: EtosParams):
    """Score samples on the line through ``center`` perpendicular to ``theta``.

    Returns ``(eta, profile, clipped)``; samples outside the grid are zero and
    flagged. Raises :class:`Boundary` when the whole line is outside.
    """
    eta = eta_grid(params)
    pts = np.asarray(center, dtype=float)[None, :] + eta[:, None] * e_eta(theta)[None, :]
    ok = oscore.inside(score, pts[:, 0], pts[:, 1])
    if not ok.any():
        raise Boundary("scan line outside the score grid")
    profile = np.zeros(eta.size, dtype=complex)
    profile[ok] = oscore.sample(score, pts[ok, 0], pts[ok, 1], theta)
    return eta, profile, not ok.all()


def _gauss(x, sigma):
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def edge_envelope(eta, mean_width: float, sigma: float, center: float = 0.0):
    """Signed double Gaussian: negative lobe at the expected left edge, positive at the right."""
    eta = np.asarray(eta, dtype=float)
    return -_gauss(eta + mean_width / 2 - center, sigma) + _gauss(eta - mean_width / 2 - center, sigma)


def align_envelope(eta, profile, mean_width: float, sigma: float, params: EtosParams) -> float:
    """Shift of the envelope that best correlates with the edge response ``Im I``.

    Shifts are searched on ``[-w/2, w/2]``; ties go to the smallest ``|shift|``,
    then the smallest shift.
    """
    n = int(math.floor(mean_width / 2 / params.shift_spacing + 1e-9))
    shifts = np.arange(-n, n + 1) * params.shift_spacing
    env = edge_envelope(eta[None, :], mean_width, sigma, shifts[:, None])
    corr = env @ np.imag(profile) * (eta[1] - eta[0])
    order = np.lexsort((shifts, np.abs(shifts)))
    best = corr[order].max()
    tol = 1e-12 * max(np.abs(corr).max(), 1e-300)
    for idx in order:
        if corr[idx] >= best - tol:
            return float(shifts[idx])
    return 0.0


def _parabolic_offset(ym, y0, yp) -> float:
    denom = ym - 2 * y0 + yp
    if denom == 0:
        return 0.0
    return float(np.clip(0.5 * (ym - yp) / denom, -0.5, 0.5))


def detect_edges(eta, profile, mean_width: float, sigma: float, center: float):
    """Left edge = minimum and right edge = maximum of ``Im I * |E|`` on either side of ``center``.

    Returns ``(eta_left, eta_right, at_boundary)``; positions are refined by a
    three-point parabola.
    """
    weighted = np.imag(profile) * np.abs(edge_envelope(eta, mean_width, sigma, center))
    h = eta[1] - eta[0]
    split = int(np.searchsorted(eta, center))
    at_boundary = False

    def refine(idx, sign):
        nonlocal at_boundary
        if idx == 0 or idx == len(eta) - 1:
            at_boundary = True
            return float(eta[idx])
        off = _parabolic_offset(sign * weighted[idx - 1], sign * weighted[idx], sign * weighted[idx + 1])
        return float(eta[idx] + off * h)

    left_range = np.arange(0, max(split, 1))
    right_range = np.arange(min(split, len(eta) - 1), len(eta))
    left_idx = left_range[np.argmin(weighted[left_range])]
    right_idx = right_range[np.argmax(weighted[right_range])]
    return refine(left_idx, -1.0), refine(right_idx, 1.0), at_boundary


def _periodic_refine(values, idx) -> float:
    n = len(values)
    return _parabolic_offset(values[(idx - 1) % n], values[idx], values[(idx + 1) % n])


def detect_orientation(score: OrientationScore, u, v, theta_prev: float):
    """Orientation maximizing ``Im(-U(u, theta) + U(v, theta))`` within a quarter turn of ``theta_prev``.

    Returns ``(theta, confident)``. A score without positive response keeps
    the previous orientation and reports low confidence.
    """
    col = -oscore.orientation_column(score, *u) + oscore.orientation_column(score, *v)
    response = np.imag(col)
    gate = np.abs(angle_diff(score.thetas, theta_prev)) <= np.pi / 2 + 1e-12
    masked = np.where(gate, response, -np.inf)
    idx = int(np.argmax(masked))
    if not np.isfinite(masked[idx]) or masked[idx] <= 0:
        return float(np.mod(theta_prev, 2 * np.pi)), False
    theta = score.thetas[idx] + _periodic_refine(response, idx) * score.dtheta
    if abs(angle_diff(theta, theta_prev)) > np.pi / 2:
        theta = score.thetas[idx]
    return float(np.mod(theta, 2 * np.pi)), True


def etos_step(score: OrientationScore, state: TrackState, params: EtosParams) -> TrackPoint:
    """One ETOS iteration; returns the new point without appending it."""
    last = state.last
    mean_width = state.mean_width()
    c_pred = estimate_center(state, params)
    eta, profile, clipped = scan_profile(score, c_pred, last.theta, params)
    shift = align_envelope(eta, profile, mean_width, params.envelope_sigma, params)
    left, right, at_boundary = detect_edges(eta, profile, mean_width, params.envelope_sigma, shift)
    normal = e_eta(last.theta)
    u = c_pred + left * normal
    v = c_pred + right * normal
    try:
        theta, confident = detect_orientation(score, u, v, last.theta)
    except OutOfBounds:
        raise Boundary("edge outside the score grid")
    if clipped:
        state.flags.append((state.step, "clipped"))
    if at_boundary:
        state.flags.append((state.step, "edge at boundary"))
    if not confident:
        state.flags.append((state.step, "low confidence"))
    return TrackPoint.from_edges(u, v, theta)


def etos_track(
    score: OrientationScore,
    seed: TrackPoint,
    params: EtosParams = EtosParams(),
    stop: StopPolicy | None = None,
    segment_id: int = 0,
    parent_id: int | None = None,
) -> VesselSegment:
    """Track from ``seed`` until a stopping criterion fires or ``max_steps`` is reached."""
    if not seed.w > 0:
        raise SeedError("seed width must be positive")
    stop = stop or StopPolicy()
    state = TrackState.start(seed, params)
    while state.step < params.max_steps:
        state.step += 1
        try:
            point = etos_step(score, state, params)
        except Boundary:
            state.stop_reason = "boundary"
            break
        if point.w < 0.5:
            state.stop_reason = "lost"
            break
        reason = stop.check(score, state, point)
        if reason in ("boundary", "low vessel value"):
            state.stop_reason = reason
            break
        state.push(point)
        if reason == "overlap":
            state.stop_reason = reason
            break
    else:
        state.stop_reason = "max steps"
    return VesselSegment(segment_id, state.points, state.stop_reason, parent_id, state.flags)

"""Multi-scale Gabor centerline tracking (CTOS).

Per step: the center is the nearest local minimum of the real response
across the vessel, the orientation the nearest local maximum of the
negated real response over angles, and the scale the ladder entry with the
largest negated real response.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oscore
from .errors import OutOfBounds, ParamError
from .oscore import OrientationScore, angle_diff, e_eta, e_xi
from .wavelets import GaborParams, build_gabor_stack, gabor_scale_for_wavelength

DEFAULT_WAVELENGTHS = (5, 10, 15, 20, 25, 30)


@dataclass(frozen=True)
class CtosParams:
    scales: tuple = tuple(gabor_scale_for_wavelength(t) for t in DEFAULT_WAVELENGTHS)
    step: float = 2.0
    eta_max: float = 20.0
    eta_spacing: float = 0.5
    max_steps: int = 1000

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float)
        if s.size < 2 or np.any(np.diff(s) <= 0) or s[0] <= 0:
            raise ParamError("scales must be positive, strictly increasing, at least two")


@dataclass
class CtosState:
    c: np.ndarray
    theta: float
    scale_index: int
    step: int = 0
    stop_reason: str | None = None


@dataclass
class CenterlineSegment:
    id: int
    centers: list
    thetas: list
    scale_indices: list
    stop_reason: str | None
    parent_id: int | None = None


class LostCenter(Exception):
    """No local minimum on the cross profile."""


def gabor_scores(image, params: CtosParams = CtosParams(), n_orientations: int = 36, threads=None) -> list:
    """One double-sided Gabor orientation score per ladder scale, of the mean-removed image."""
    data = np.asarray(getattr(image, "data", image), dtype=float)
    data = data - data.mean()
    scores = []
    for a in params.scales:
        stack = build_gabor_stack(GaborParams(scale=a, n_orientations=n_orientations), data.shape)
        scores.append(oscore.transform(data, stack, threads=threads))
    return scores


def _interior_minima(values):
    v = np.asarray(values)
    idx = np.arange(1, len(v) - 1)
    return idx[(v[idx] < v[idx - 1]) & (v[idx] <= v[idx + 1])]


def _parabola(ym, y0, yp):
    d = ym - 2 * y0 + yp
    return 0.0 if d == 0 else float(np.clip(0.5 * (ym - yp) / d, -0.5, 0.5))


def nearest_center(eta, real_profile) -> float:
    """Nearest local minimum to ``eta = 0``; ties go to the smaller ``eta``."""
    minima = _interior_minima(real_profile)
    if minima.size == 0:
        raise LostCenter("no local minimum on the profile")
    order = np.lexsort((eta[minima], np.abs(eta[minima])))
    i = minima[order[0]]
    off = _parabola(real_profile[i - 1], real_profile[i], real_profile[i + 1])
    return float(eta[i] + off * (eta[1] - eta[0]))


def nearest_orientation(thetas, response, theta_prev: float) -> float:
    """Nearest local maximum (periodic) of ``response`` to ``theta_prev``."""
    n = len(response)
    r = np.asarray(response)
    peaks = [i for i in range(n) if r[i] > r[i - 1] and r[i] >= r[(i + 1) % n]]
    if not peaks:
        return float(theta_prev)
    dist = [(abs(angle_diff(thetas[i], theta_prev)), thetas[i], i) for i in peaks]
    _, _, i = min(dist)
    off = _parabola(r[i - 1], r[i], r[(i + 1) % n])
    return float(np.mod(thetas[i] + off * (2 * np.pi / n), 2 * np.pi))


def select_scale(scores, c, theta: float) -> int:
    """Ladder index with the largest ``Re(-U_a(c, theta))``."""
    values = [-np.real(oscore.sample(s, c[0], c[1], theta)) for s in scores]
    return int(np.argmax(values))


def ctos_step(scores, state: CtosState, params: CtosParams) -> CtosState:
    score = scores[state.scale_index]
    c_pred = state.c + params.step * e_xi(state.theta)
    n = int(round(params.eta_max / params.eta_spacing))
    eta = np.arange(-n, n + 1) * params.eta_spacing
    pts = c_pred[None, :] + eta[:, None] * e_eta(state.theta)[None, :]
    ok = oscore.inside(score, pts[:, 0], pts[:, 1])
    if not ok[n]:
        raise OutOfBounds("predicted center outside the grid")
    # keep the contiguous in-grid run around the predicted center
    lo, hi = n, n
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    while hi < len(eta) - 1 and ok[hi + 1]:
        hi += 1
    real = np.real(oscore.sample(score, pts[lo:hi + 1, 0], pts[lo:hi + 1, 1], state.theta))
    shift = nearest_center(eta[lo:hi + 1], real)
    c = c_pred + shift * e_eta(state.theta)
    column = -np.real(oscore.orientation_column(score, c[0], c[1]))
    theta = nearest_orientation(score.thetas, column, state.theta)
    scale_index = select_scale(scores, c, theta)
    return CtosState(c, theta, scale_index, state.step + 1)


def ctos_track(scores, c0, theta0: float, params: CtosParams = CtosParams(), mask=None, segment_id: int = 0) -> CenterlineSegment:
    """Track a centerline from ``(c0, theta0)``; the initial scale follows the scale-selection rule."""
    c0 = np.asarray(c0, dtype=float)
    if not oscore.inside(scores[0], c0[0], c0[1]):
        raise OutOfBounds("seed outside the grid")
    state = CtosState(c0, float(theta0), select_scale(scores, c0, theta0))
    centers, thetas, scales = [c0], [state.theta], [state.scale_index]
    reason = "max steps"
    while state.step < params.max_steps:
        try:
            state = ctos_step(scores, state, params)
        except LostCenter:
            reason = "lost center"
            break
        except OutOfBounds:
            reason = "boundary"
            break
        x, y = state.c
        if mask is not None and not mask[int(round(y)), int(round(x))]:
            reason = "boundary"
            break
        centers.append(state.c)
        thetas.append(state.theta)
        scales.append(state.scale_index)
    return CenterlineSegment(segment_id, centers, thetas, scales, reason)

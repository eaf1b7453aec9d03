"""FFT helpers, Gaussian smoothing, 1-D scale space with toppoints, Hilbert transforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, special

from .errors import ParamError

# Nyquist radius in radians per pixel for unit pixel spacing.
NYQUIST = np.pi


def fft2(f: np.ndarray) -> np.ndarray:
    """Unitary 2-D DFT (``1/sqrt(N)`` on both directions), so Parseval is exact."""
    return np.fft.fft2(f, norm="ortho")


def ifft2(spectrum: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(spectrum, norm="ortho")


def frequency_grid(shape) -> tuple[np.ndarray, np.ndarray]:
    """Angular frequencies ``(omega_x, omega_y)`` in rad/px on the FFT layout.

    Arrays have the image shape; ``omega_x`` varies along columns.
    """
    rows, cols = shape
    wy = 2 * np.pi * np.fft.fftfreq(rows)
    wx = 2 * np.pi * np.fft.fftfreq(cols)
    return np.meshgrid(wx, wy)


def centered_coordinates(shape) -> tuple[np.ndarray, np.ndarray]:
    """Periodic pixel offsets from the origin in FFT layout (``x`` along columns)."""
    rows, cols = shape
    y = np.fft.fftfreq(rows) * rows
    x = np.fft.fftfreq(cols) * cols
    return np.meshgrid(x, y)


def gaussian_blur(f: np.ndarray, sigma: float, boundary: str = "periodic") -> np.ndarray:
    """Convolve with an isotropic Gaussian of standard deviation ``sigma`` pixels.

    The periodic policy multiplies the spectrum by ``exp(-sigma^2 |omega|^2 / 2)``,
    which keeps the semigroup property exact; ``"mirror"`` uses a spatial
    kernel with reflected borders.
    """
    if sigma < 0:
        raise ParamError("sigma must be non-negative")
    f = np.asarray(f, dtype=float)
    if sigma == 0:
        return f.copy()
    if boundary == "periodic":
        wx, wy = frequency_grid(f.shape)
        transfer = np.exp(-0.5 * sigma**2 * (wx**2 + wy**2))
        return np.real(np.fft.ifft2(np.fft.fft2(f) * transfer))
    if boundary == "mirror":
        return ndimage.gaussian_filter(f, sigma, mode="mirror")
    raise ParamError(f"unknown boundary policy {boundary!r}")


# --------------------------------------------------------------------------
# 1-D scale space

DEFAULT_T0 = 0.5
DEFAULT_RATIO = np.sqrt(2.0)
DEFAULT_LEVELS = 16


def default_ladder(t0: float = DEFAULT_T0, ratio: float = DEFAULT_RATIO, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Geometric ladder of scales (variances in px^2)."""
    return t0 * ratio ** np.arange(levels)


def discrete_gaussian_blur_1d(profile: np.ndarray, t: float) -> np.ndarray:
    """Blur with the discrete analogue of the Gaussian, ``exp(-t) I_n(t)``.

    Unlike a sampled Gaussian this kernel never creates new local extrema,
    which makes the extremum count monotone along the ladder.
    """
    profile = np.asarray(profile, dtype=float)
    if t <= 0:
        return profile.copy()
    radius = int(np.ceil(6 * np.sqrt(t))) + 4
    n = np.arange(-radius, radius + 1)
    kernel = special.ive(np.abs(n), t)
    kernel /= kernel.sum()
    padded = np.pad(profile, radius, mode="symmetric") if profile.size > 1 else np.pad(profile, radius, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


@dataclass(frozen=True)
class ScaleSpace1D:
    """Blurred copies of a profile; ``scales[0] == 0`` holds the input itself."""

    profile: np.ndarray
    scales: np.ndarray
    levels: np.ndarray


def scale_space_1d(profile, ladder=None) -> ScaleSpace1D:
    """Build the 1-D scale space of ``profile`` over a geometric ladder."""
    profile = np.asarray(profile, dtype=float)
    ladder = default_ladder() if ladder is None else np.asarray(ladder, dtype=float)
    if ladder.size < 8:
        raise ParamError("ladder needs at least 8 levels")
    if np.any(np.diff(ladder) <= 0) or ladder[0] <= 0:
        raise ParamError("ladder must be positive and strictly increasing")
    scales = np.concatenate([[0.0], ladder])
    levels = np.stack([discrete_gaussian_blur_1d(profile, t) for t in scales])
    return ScaleSpace1D(profile, scales, levels)


def local_extrema(values: np.ndarray, rel_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima.

    A plateau counts once, at its left end. Differences below
    ``rel_tol * max|values|`` are treated as flat.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        return np.empty(0, int), np.empty(0, int)
    tol = rel_tol * max(np.max(np.abs(values)), 1e-300)
    d = np.diff(values)
    sign = np.where(d > tol, 1, np.where(d < -tol, -1, 0))
    maxima, minima = [], []
    # walk the sign sequence skipping flats; an extremum is a sign flip
    last_sign, last_idx = 0, 0
    for i, s in enumerate(sign):
        if s == 0:
            continue
        if last_sign == 1 and s == -1:
            maxima.append(last_idx)
        elif last_sign == -1 and s == 1:
            minima.append(last_idx)
        last_sign = s
        last_idx = i + 1
    return np.array(maxima, dtype=int), np.array(minima, dtype=int)


@dataclass
class ExtremumTrack:
    """An extremum followed upward through the scale space."""

    kind: str  # "max" or "min"
    positions: list  # position per level, starting at level 0
    end_level: int  # last level where it exists

    @property
    def start(self) -> float:
        return self.positions[0]


@dataclass(frozen=True)
class Toppoint:
    position: float
    scale: float | None
    persisted: bool


def track_extrema(ss: ScaleSpace1D) -> list[ExtremumTrack]:
    """Link extrema of level 0 across scales by nearest-neighbour matching.

    Matching uses same-kind extrema within ``2 sqrt(delta t)`` pixels (at
    least one pixel). Each extremum at the next level is claimed by at most
    one track, closest pairs first.
    """
    def extrema(level):
        mx, mn = local_extrema(ss.levels[level])
        return {"max": mx.astype(float), "min": mn.astype(float)}

    current = extrema(0)
    tracks = [ExtremumTrack(kind, [p], 0) for kind in ("max", "min") for p in current[kind]]
    alive = list(range(len(tracks)))
    for level in range(1, len(ss.scales)):
        radius = max(2.0 * np.sqrt(ss.scales[level] - ss.scales[level - 1]), 1.0)
        nxt = extrema(level)
        still = []
        for kind in ("max", "min"):
            ids = [i for i in alive if tracks[i].kind == kind]
            cands = nxt[kind]
            pairs = sorted(
                (abs(tracks[i].positions[-1] - c), tracks[i].positions[-1], j, i)
                for i in ids
                for j, c in enumerate(cands)
                if abs(tracks[i].positions[-1] - c) <= radius
            )
            used_t, used_c = set(), set()
            for _, _, j, i in pairs:
                if i in used_t or j in used_c:
                    continue
                used_t.add(i)
                used_c.add(j)
                tracks[i].positions.append(float(cands[j]))
                tracks[i].end_level = level
                still.append(i)
        alive = sorted(still)
    return tracks


def toppoints_1d(ss: ScaleSpace1D, tracks: list[ExtremumTrack] | None = None) -> list[Toppoint]:
    """Annihilation events of extremum pairs, plus survivors marked as persisted.

    A maximum and a minimum vanishing at the same level and adjacent to each
    other form one event, located midway at the first scale where both are
    gone. Unpaired vanishing extrema produce an event on their own.
    """
    tracks = track_extrema(ss) if tracks is None else tracks
    top = len(ss.scales) - 1
    events = []
    by_level: dict[int, list[ExtremumTrack]] = {}
    for tr in tracks:
        if tr.end_level == top:
            events.append(Toppoint(tr.positions[-1], None, True))
        else:
            by_level.setdefault(tr.end_level, []).append(tr)
    for level in sorted(by_level):
        group = sorted(by_level[level], key=lambda t: t.positions[-1])
        scale = float(ss.scales[level + 1])
        maxima = [t for t in group if t.kind == "max"]
        minima = [t for t in group if t.kind == "min"]
        used = set()
        pairs = sorted(
            (abs(a.positions[-1] - b.positions[-1]), ia, ib)
            for ia, a in enumerate(maxima)
            for ib, b in enumerate(minima)
        )
        paired_min = set()
        for _, ia, ib in pairs:
            if ia in used or ib in paired_min:
                continue
            used.add(ia)
            paired_min.add(ib)
            pos = 0.5 * (maxima[ia].positions[-1] + minima[ib].positions[-1])
            events.append(Toppoint(pos, scale, False))
        for ia, a in enumerate(maxima):
            if ia not in used:
                events.append(Toppoint(a.positions[-1], scale, False))
        for ib, b in enumerate(minima):
            if ib not in paired_min:
                events.append(Toppoint(b.positions[-1], scale, False))
    return sorted(events, key=lambda e: (e.persisted, e.scale if e.scale is not None else np.inf, e.position))


# --------------------------------------------------------------------------
# Hilbert transforms


def hilbert_1d(profile) -> np.ndarray:
    """Hilbert transform via the frequency multiplier ``i sign(omega)``.

    The forward DFT uses the ``exp(-i omega x)`` kernel, so ``cos`` maps to
    ``-sin``. Real input returns a real array.
    """
    profile = np.asarray(profile)
    omega = np.fft.fftfreq(profile.shape[-1])
    out = np.fft.ifft(1j * np.sign(omega) * np.fft.fft(profile))
    return out.real if np.isrealobj(profile) else out


def hilbert_directional(f, theta: float) -> np.ndarray:
    """2-D Hilbert transform along ``e_eta = (-sin theta, cos theta)``.

    Multiplier ``i sign(omega . e_eta)`` on the FFT grid.
    """
    f = np.asarray(f)
    wx, wy = frequency_grid(f.shape)
    proj = -np.sin(theta) * wx + np.cos(theta) * wy
    proj = np.where(np.abs(proj) < 1e-12, 0.0, proj)
    out = np.fft.ifft2(1j * np.sign(proj) * np.fft.fft2(f))
    return out.real if np.isrealobj(f) else out

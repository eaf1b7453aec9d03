"""Orientation scores: transform, reconstruction, sampling and SE(2) utilities.

The score is ``U[i, row, col] = U(x=col, y=row, theta_i)`` computed as the
correlation of the image with ``psi_theta_i``, i.e. in the Fourier domain
``F U_i = conj(F psi_i) F f``.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimError, IllConditioned, OutOfBounds
from .wavelets import WaveletStack

THREADS_ENV = "ORIENTRACE_THREADS"

# Absolute floor on M_psi inside the pass band for exact reconstruction.
M_PSI_FLOOR = 1e-6
# Outside the pass band, bins below this are zeroed instead of divided; float64
# round-off in the score is amplified by at most about 1/sqrt of it.
M_PSI_ZERO = 1e-12


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: the environment variable wins over the argument."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, int(threads or 1))


def _map_layers(func, n: int, threads: int | None):
    workers = resolve_threads(threads)
    if workers == 1:
        return [func(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(n)))


@dataclass(frozen=True)
class OrientationScore:
    """Complex samples ``data[theta_index, row, col]`` on a uniform ``[0, 2 pi)`` grid."""

    data: np.ndarray
    thetas: np.ndarray
    family: str
    sidedness: str

    @property
    def n_orientations(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1:]

    @property
    def dtheta(self) -> float:
        return 2 * np.pi / self.n_orientations

    def scaled(self, factor: float) -> "OrientationScore":
        return OrientationScore(self.data * factor, self.thetas, self.family, self.sidedness)


def transform(f, stack: WaveletStack, threads: int | None = None) -> OrientationScore:
    """Lift an image to an orientation score by per-orientation FFT correlation.

    ``f`` may be an :class:`~orientrace.raster.Image2D` or a 2-D array.
    """
    data = np.asarray(getattr(f, "data", f), dtype=float)
    if data.shape != stack.shape:
        raise DimError(f"image shape {data.shape} does not match stack {stack.shape}")
    if abs(data.mean()) > 1e-6 * max(np.abs(data).max(), 1e-300):
        warnings.warn("transform input is not DC-removed", RuntimeWarning, stacklevel=2)
    spectrum = np.fft.fft2(data)
    layers = _map_layers(lambda i: np.fft.ifft2(np.conj(stack.fourier[i]) * spectrum), stack.n_orientations, threads)
    return OrientationScore(np.stack(layers), stack.thetas.copy(), stack.family, stack.sidedness)


def reconstruct(
    score: OrientationScore, stack: WaveletStack, divide_m_psi: bool = True, threads: int | None = None
) -> np.ndarray:
    """Invert the transform: back-project every layer and normalize by ``M_psi``.

    In discrete form ``f = ifft( sum_i F psi_i F U_i / M_psi )`` with
    ``M_psi = sum_i |F psi_i|^2``. Bins where ``M_psi`` falls below
    ``M_PSI_ZERO`` are set to zero; inside the pass band ``M_psi`` must stay
    above ``M_PSI_FLOOR``. With ``divide_m_psi=False`` the
    normalization is skipped.
    """
    if score.data.shape[0] != stack.n_orientations or score.shape != stack.shape:
        raise DimError("score does not match the stack")
    parts = _map_layers(lambda i: stack.fourier[i] * np.fft.fft2(score.data[i]), stack.n_orientations, threads)
    back = np.sum(parts, axis=0)
    if divide_m_psi:
        m = stack.m_psi()
        band = stack.pass_band()
        if np.any(m[band] < M_PSI_FLOOR):
            raise IllConditioned(f"M_psi drops to {m[band].min():.3e} inside the pass band")
        safe = m >= M_PSI_ZERO
        back = np.where(safe, back / np.where(safe, m, 1.0), 0.0)
    return np.real(np.fft.ifft2(back))


def reconstruct_approx(score: OrientationScore) -> np.ndarray:
    """Fast reconstruction by integrating over orientations only.

    For cake stacks the Fourier wedges sum to ``M_N`` (close to one in the
    pass band), so the plain sum over layers returns the image.
    """
    return np.real(score.data.sum(axis=0))


# --------------------------------------------------------------------------
# sampling


def _bilinear_weights(score: OrientationScore, x, y):
    rows, cols = score.shape
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)) or np.any(x < 0) or np.any(y < 0) or np.any(x > cols - 1) or np.any(y > rows - 1):
        raise OutOfBounds("sample position outside the score grid")
    x0 = np.minimum(np.floor(x).astype(int), cols - 2)
    y0 = np.minimum(np.floor(y).astype(int), rows - 2)
    return x0, y0, x - x0, y - y0


def inside(score: OrientationScore, x, y) -> np.ndarray:
    rows, cols = score.shape
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return (x >= 0) & (y >= 0) & (x <= cols - 1) & (y <= rows - 1)


def sample_layer(score: OrientationScore, layer: int, x, y) -> np.ndarray:
    """Bilinear samples of a single orientation layer at arrays of positions."""
    x0, y0, fx, fy = _bilinear_weights(score, x, y)
    d = score.data[layer]
    return (
        d[y0, x0] * (1 - fx) * (1 - fy)
        + d[y0, x0 + 1] * fx * (1 - fy)
        + d[y0 + 1, x0] * (1 - fx) * fy
        + d[y0 + 1, x0 + 1] * fx * fy
    )


def sample(score: OrientationScore, x, y, theta) -> np.ndarray:
    """Bilinear in position, linear in orientation with ``2 pi`` wrap-around.

    Accepts scalars or broadcastable arrays; raises :class:`OutOfBounds`
    outside the grid.
    """
    x, y, theta = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(theta, float))
    x0, y0, fx, fy = _bilinear_weights(score, x, y)
    n = score.n_orientations
    pos = np.mod(theta, 2 * np.pi) / score.dtheta
    t0 = np.floor(pos).astype(int) % n
    ft = pos - np.floor(pos)
    t1 = (t0 + 1) % n
    d = score.data

    def spatial(t):
        return (
            d[t, y0, x0] * (1 - fx) * (1 - fy)
            + d[t, y0, x0 + 1] * fx * (1 - fy)
            + d[t, y0 + 1, x0] * (1 - fx) * fy
            + d[t, y0 + 1, x0 + 1] * fx * fy
        )

    out = spatial(t0) * (1 - ft) + spatial(t1) * ft
    return out[()] if out.ndim == 0 else out


def orientation_column(score: OrientationScore, x: float, y: float) -> np.ndarray:
    """All orientation samples at one (interpolated) position, length ``N_o``."""
    x0, y0, fx, fy = _bilinear_weights(score, x, y)
    d = score.data
    return (
        d[:, y0, x0] * (1 - fx) * (1 - fy)
        + d[:, y0, x0 + 1] * fx * (1 - fy)
        + d[:, y0 + 1, x0] * (1 - fx) * fy
        + d[:, y0 + 1, x0 + 1] * fx * fy
    )


# --------------------------------------------------------------------------
# frame and group


@dataclass(frozen=True)
class Frame:
    e_xi: np.ndarray
    e_eta: np.ndarray


def frame(theta: float) -> Frame:
    """Moving frame: ``e_xi`` along the orientation, ``e_eta`` a quarter turn further."""
    c, s = np.cos(theta), np.sin(theta)
    return Frame(np.array([c, s]), np.array([-s, c]))


def e_xi(theta):
    return np.array([np.cos(theta), np.sin(theta)])


def e_eta(theta):
    return np.array([-np.sin(theta), np.cos(theta)])


@dataclass(frozen=True)
class Se2Element:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(np.mod(self.theta, 2 * np.pi)))


def se2_mul(g: Se2Element, h: Se2Element) -> Se2Element:
    """Group product ``(R_theta x' + x, theta + theta')``."""
    c, s = np.cos(g.theta), np.sin(g.theta)
    return Se2Element(c * h.x - s * h.y + g.x, s * h.x + c * h.y + g.y, g.theta + h.theta)


def se2_inv(g: Se2Element) -> Se2Element:
    """Inverse ``(-R_{-theta} x, -theta)``."""
    c, s = np.cos(g.theta), np.sin(g.theta)
    return Se2Element(-(c * g.x + s * g.y), -(-s * g.x + c * g.y), -g.theta)


def angle_diff(a, b):
    """Signed difference ``a - b`` wrapped to ``[-pi, pi)``."""
    return np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi

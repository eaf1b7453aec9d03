"""Image loading, channel selection and intensity preprocessing."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EmptyMask, FormatError, NotFound, ParamError
from . import spectral

_SUPPORTED = {"PNG", "PPM"}  # Pillow reports PGM/PBM/PPM as "PPM"
_CHANNELS = ("gray", "red", "green")


@dataclass(frozen=True)
class Image2D:
    """Real-valued image with a boolean field-of-view mask.

    ``data`` is indexed ``[row, column]``; point coordinates used by the
    tracking code are ``(x, y) = (column, row)``.
    """

    data: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise FormatError(f"expected a 2-D grid, got shape {data.shape}")
        mask = np.ones(data.shape, dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != data.shape:
            raise FormatError("mask and data shapes differ")
        data.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "Image2D":
        return replace(self, data=data)


@dataclass(frozen=True)
class PreprocessParams:
    sigma_lum: float = 32.0
    boundary: str = "periodic"

    def __post_init__(self):
        if not self.sigma_lum > 0:
            raise ParamError("sigma_lum must be positive")
        if self.boundary not in ("periodic", "mirror"):
            raise ParamError(f"unknown boundary policy {self.boundary!r}")


def _read_array(path) -> tuple[np.ndarray, float]:
    """Return the raw pixel array and its full-scale value."""
    if not os.path.exists(path):
        raise NotFound(str(path))
    try:
        with Image.open(path) as im:
            if im.format not in _SUPPORTED:
                raise FormatError(f"{path}: unsupported format {im.format}")
            mode = im.mode
            if mode in ("P", "LA", "RGBA", "1"):
                im = im.convert("RGB" if mode != "LA" else "L")
                mode = im.mode
            arr = np.array(im)
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if mode.startswith("I;16") or mode == "I" or arr.dtype == np.uint16:
        full = 65535.0
    elif arr.dtype == np.uint8:
        full = 255.0
    else:
        raise FormatError(f"{path}: unsupported pixel mode {mode}")
    return arr.astype(float), full


def load_image(path, channel: str = "gray", mask_path=None) -> Image2D:
    """Load a PNG or PGM/PPM file as an :class:`Image2D` scaled to [0, 1].

    Parameters
    ----------
    path : path-like
        Image file, 8- or 16-bit.
    channel : {"gray", "red", "green"}
        Plane to extract from color inputs. ``"gray"`` on a color image uses
        Rec. 601 luma weights; on a grayscale image every choice returns the
        single plane.
    mask_path : path-like, optional
        Grayscale image whose nonzero pixels mark the field of view.
    """
    if channel not in _CHANNELS:
        raise ParamError(f"channel must be one of {_CHANNELS}")
    arr, full = _read_array(path)
    arr = arr / full
    if arr.ndim == 3:
        if channel == "red":
            arr = arr[..., 0]
        elif channel == "green":
            arr = arr[..., 1]
        else:
            arr = arr[..., :3] @ np.array([0.299, 0.587, 0.114])
    mask = None
    if mask_path is not None:
        mask_arr, _ = _read_array(mask_path)
        if mask_arr.ndim == 3:
            mask_arr = mask_arr.max(axis=2)
        if mask_arr.shape != arr.shape:
            raise FormatError("mask dimensions differ from the image")
        mask = mask_arr != 0
    return Image2D(arr, mask)


def load_rgb(path) -> np.ndarray:
    """Load an image as an ``(H, W, 3)`` float array in [0, 1]; gray inputs are replicated."""
    arr, full = _read_array(path)
    arr = arr / full
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    return arr[..., :3]


def save_image(path, values: np.ndarray, bits: int = 8) -> None:
    """Write a grayscale or RGB array with values in [0, 1].

    The file format follows the extension (``.png``, ``.pgm``, ``.ppm``).
    Values are clipped, scaled to the full range and rounded.
    """
    values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    if bits == 8:
        img = Image.fromarray(np.rint(values * 255).astype(np.uint8))
    elif bits == 16:
        if values.ndim != 2:
            raise FormatError("16-bit output supports grayscale only")
        img = Image.fromarray(np.rint(values * 65535).astype(np.uint16))
    else:
        raise ParamError("bits must be 8 or 16")
    img.save(path)


def _check_finite(f: Image2D):
    if not np.all(np.isfinite(f.data)):
        raise ParamError("image contains non-finite values")


def normalize_luminosity(f: Image2D, params: PreprocessParams = PreprocessParams()) -> Image2D:
    """Subtract the slowly varying luminosity drift ``G_sigma * f``."""
    _check_finite(f)
    drift = spectral.gaussian_blur(f.data, params.sigma_lum, boundary=params.boundary)
    return f.with_data(f.data - drift)


def remove_dc(f: Image2D) -> Image2D:
    """Shift the image so that its mean over the mask is zero.

    Dark structures on a brighter background end up negative.
    """
    _check_finite(f)
    if not f.mask.any():
        raise EmptyMask("mask selects no pixels")
    return f.with_data(f.data - f.data[f.mask].mean())


def preprocess(
    f: Image2D,
    params: PreprocessParams = PreprocessParams(),
    normalize: bool = True,
    normalize_first: bool = True,
) -> Image2D:
    """Apply luminosity normalization and DC removal in the chosen order."""
    if not normalize:
        return remove_dc(f)
    if normalize_first:
        return remove_dc(normalize_luminosity(f, params))
    return normalize_luminosity(remove_dc(f), params)

"""Image ingestion and centred log-magnitude Fourier spectra of the luma channel."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

IMAGE_SIDE = 256

# BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageLoadError(ValueError):
    """Raised when an image file cannot be decoded into a usable RGB array."""


@dataclass(frozen=True)
class Spectrum:
    """Normalized log-magnitude spectrum with values in [0, 1]."""

    data: np.ndarray
    dc_centered: bool = True

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def bilinear_resize(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Resize a 2D (or HxWxC) array with bilinear interpolation.

    Pixel centres are aligned (half-pixel convention) and samples outside the
    grid are clamped to the border, so halving an even-sided image averages
    each 2x2 block.
    """
    arr = np.asarray(arr, dtype=float)
    out_h, out_w = shape
    in_h, in_w = arr.shape[:2]

    def coords(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = coords(out_h, in_h)
    x0, x1, fx = coords(out_w, in_w)
    if arr.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bottom = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


def load_image(path, side: int = IMAGE_SIDE) -> np.ndarray:
    """Decode a PNG/JPEG file into an ``(side, side, 3)`` float array in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise ImageLoadError(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise ImageLoadError(f"unsupported format {im.format!r}: {path}")
            rgb = np.asarray(im.convert("RGB"), dtype=float) / 255.0
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageLoadError(f"cannot decode {path}: {exc}") from exc
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ImageLoadError(f"zero-area image: {path}")
    if rgb.shape[:2] != (side, side):
        rgb = np.clip(bilinear_resize(rgb, (side, side)), 0.0, 1.0)
    return rgb


def rgb_to_luma(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {img.shape}")
    return img @ LUMA_WEIGHTS


def dft2(luma: np.ndarray) -> np.ndarray:
    """Uncentred exact-length 2D DFT of a real matrix."""
    return np.fft.fft2(np.asarray(luma, dtype=float))


def _minmax(values: np.ndarray) -> np.ndarray | None:
    lo, hi = values.min(), values.max()
    if hi - lo <= 0:
        return None
    return (values - lo) / (hi - lo)


def _dc_delta(shape) -> np.ndarray:
    out = np.zeros(shape)
    out[shape[0] // 2, shape[1] // 2] = 1.0
    return out


def compute_spectrum(luma: np.ndarray) -> Spectrum:
    """Centred, log-compressed, min-max normalized magnitude spectrum.

    A spectrum with no dynamic range (e.g. an all-black image) is defined as
    the DC delta: 1 at the centre bin and 0 elsewhere.
    """
    luma = np.asarray(luma, dtype=float)
    if luma.ndim != 2 or luma.size == 0:
        raise ValueError(f"expected a non-empty 2D luma matrix, got shape {luma.shape}")
    magnitude = np.fft.fftshift(np.abs(dft2(luma)))
    normed = _minmax(np.log1p(magnitude))
    if normed is None:
        normed = _dc_delta(luma.shape)
    return Spectrum(normed)


def image_spectrum(path, side: int = IMAGE_SIDE) -> Spectrum:
    return compute_spectrum(rgb_to_luma(load_image(path, side)))


def average_spectra(specs: Sequence[Spectrum]) -> Spectrum:
    """Element-wise mean of spectra, re-normalized to [0, 1]."""
    if len(specs) == 0:
        raise ValueError("cannot average an empty list of spectra")
    shape = specs[0].shape
    for s in specs:
        if s.shape != shape:
            raise ValueError(f"spectrum shape mismatch: {s.shape} vs {shape}")
    mean = np.mean([s.data for s in specs], axis=0)
    normed = _minmax(mean)
    return Spectrum(mean if normed is None else normed)


def diagonal_profile(spec: Spectrum) -> np.ndarray:
    """Values along the main diagonal, top-left to bottom-right."""
    if spec.height != spec.width:
        raise ValueError(f"diagonal profile needs a square spectrum, got {spec.shape}")
    return np.diagonal(spec.data).copy()


def write_matrix_csv(path, matrix) -> None:
    """Row-major CSV, one matrix row per line, '.' as decimal point."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="ascii") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def write_spectrum_png(path, spec: Spectrum) -> None:
    gray = np.round(np.clip(spec.data, 0.0, 1.0) * 255).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(path)

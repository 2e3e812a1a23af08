"""Spectrum preprocessing and per-cell HOG descriptors."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .spectrum import Spectrum, bilinear_resize

N_ORIENTATIONS = 9
CELL_SIZE = 16
BLOCK_SIZE = 64
SMOOTH_SIZE = 9
SMOOTH_SIGMA = 2.0
BLOCK_EPS = 1e-12


def gaussian_kernel(size: int = SMOOTH_SIZE, sigma: float = SMOOTH_SIGMA) -> np.ndarray:
    """Square, unit-sum Gaussian mask of odd side ``size``."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = np.arange(size) - size // 2
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def preprocess_spectrum(spec: Spectrum | np.ndarray, kernel_size: int = SMOOTH_SIZE,
                        sigma: float = SMOOTH_SIGMA) -> np.ndarray:
    """Halve the spectrum, keep its top-left quarter and smooth it.

    A 256x256 spectrum becomes a 64x64 array.
    """
    data = spec.data if isinstance(spec, Spectrum) else np.asarray(spec, dtype=float)
    h, w = data.shape
    if h != w:
        raise ValueError(f"expected a square spectrum, got {data.shape}")
    if h < 8 or h % 4:
        raise ValueError(f"spectrum side must be >= 8 and divisible by 4, got {h}")
    half = bilinear_resize(data, (h // 2, w // 2))
    quarter = half[: h // 4, : w // 4]
    # scipy's "reflect" repeats the edge sample (d c b a | a b c d)
    return ndimage.convolve(quarter, gaussian_kernel(kernel_size, sigma), mode="reflect")


def gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centred differences inside, one-sided differences on the border rows/cols."""
    gy, gx = np.gradient(np.asarray(img, dtype=float))
    return gx, gy


def cell_histograms(img: np.ndarray, cell_size: int = CELL_SIZE,
                    n_orientations: int = N_ORIENTATIONS) -> np.ndarray:
    """Unnormalized orientation histograms, shape ``(cells_y, cells_x, n_orientations)``.

    Orientations are unsigned in [0, 180). Bin ``b`` is centred on
    ``b * 180 / n_orientations`` degrees; each gradient votes its magnitude
    split linearly between the two nearest bin centres (wrapping at 180).
    """
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    if h % cell_size or w % cell_size:
        raise ValueError(f"image shape {img.shape} not divisible by cell size {cell_size}")
    gx, gy = gradients(img)
    magnitude = np.hypot(gx, gy)
    theta = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)

    pos = theta / (180.0 / n_orientations)
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    lo %= n_orientations
    hi = (lo + 1) % n_orientations

    cy, cx = h // cell_size, w // cell_size
    cell_id = (np.arange(h)[:, None] // cell_size) * cx + np.arange(w)[None, :] // cell_size
    cell_id = cell_id.ravel()
    flat = np.zeros(cy * cx * n_orientations)
    np.add.at(flat, cell_id * n_orientations + lo.ravel(), (magnitude * (1 - frac)).ravel())
    np.add.at(flat, cell_id * n_orientations + hi.ravel(), (magnitude * frac).ravel())
    return flat.reshape(cy, cx, n_orientations)


def hog_descriptors(q: np.ndarray, cell_size: int = CELL_SIZE, block_size: int = BLOCK_SIZE,
                    n_orientations: int = N_ORIENTATIONS) -> np.ndarray:
    """Block-normalized per-cell descriptors, shape ``(n_cells, n_orientations)``.

    Blocks tile the cell grid without overlap; each block's concatenated
    histogram is L2-normalized and every cell keeps its slice. Rows are in
    row-major cell order (see ``cell_coordinates``).
    """
    hist = cell_histograms(q, cell_size, n_orientations)
    cy, cx, _ = hist.shape
    bc = max(1, block_size // cell_size)
    out = np.empty_like(hist)
    for by in range(0, cy, bc):
        for bx in range(0, cx, bc):
            block = hist[by:by + bc, bx:bx + bc]
            out[by:by + bc, bx:bx + bc] = block / (np.linalg.norm(block) + BLOCK_EPS)
    return out.reshape(cy * cx, n_orientations)


def cell_coordinates(shape: tuple[int, int], cell_size: int = CELL_SIZE) -> np.ndarray:
    """``(cell_y, cell_x)`` pairs matching the row order of ``hog_descriptors``."""
    cy, cx = shape[0] // cell_size, shape[1] // cell_size
    yy, xx = np.mgrid[0:cy, 0:cx]
    return np.column_stack([yy.ravel(), xx.ravel()])


def write_descriptors_csv(path, descriptors: np.ndarray, coords: np.ndarray) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("cell_y,cell_x," + ",".join(f"bin{b}" for b in range(descriptors.shape[1])) + "\n")
        for (y, x), row in zip(coords, descriptors):
            fh.write(f"{y},{x}," + ",".join(repr(float(v)) for v in row) + "\n")

"""Synthetic stand-in corpus: smooth 1/f noise ("real") and the same with a faint periodic grid ("fake").

The grid modulates the image rather than being pasted on top, the way
upsampling layers imprint periodic structure: every lattice frequency then
carries a copy of the image's bright low-frequency lobe, giving the
grid-of-blobs pattern in the spectrum.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .spectrum import IMAGE_SIDE

GRID_PERIODS = (8, 16)          # inclusive pixel range
GRID_AMPLITUDE = (0.15, 0.3)    # modulation depth


def pink_field(rng: np.random.Generator, side: int = IMAGE_SIDE) -> np.ndarray:
    """Gaussian random field with amplitude spectrum ~ 1/f^beta, scaled to [0, 1]."""
    beta = rng.uniform(0.8, 1.3)
    white = rng.normal(size=(side, side))
    fy = np.fft.fftfreq(side)[:, None]
    fx = np.fft.fftfreq(side)[None, :]
    f = np.hypot(fy, fx)
    f[0, 0] = 1.0
    field = np.real(np.fft.ifft2(np.fft.fft2(white) / f**beta))
    field = ndimage.gaussian_filter(field, rng.uniform(0.6, 1.5), mode="wrap")
    lo, hi = field.min(), field.max()
    return (field - lo) / (hi - lo)


def real_like(rng: np.random.Generator, side: int = IMAGE_SIDE) -> np.ndarray:
    base = pink_field(rng, side)
    lo = rng.uniform(0.05, 0.25)
    hi = rng.uniform(0.75, 0.95)
    base = lo + (hi - lo) * base
    tint = rng.uniform(0.85, 1.0, size=3)
    rgb = base[:, :, None] * tint[None, None, :]
    rgb += 0.02 * np.stack([pink_field(rng, side) for _ in range(3)], axis=2)
    return np.clip(rgb, 0.0, 1.0)


def grid_pattern(rng: np.random.Generator, side: int = IMAGE_SIDE, period: int | None = None) -> np.ndarray:
    """Zero-mean mesh of one-pixel lines (0.5) with brighter crossings (1.5).

    Random phase, and random period unless one is given. Lines alone are
    separable and only light up the spectral axes; the extra weight on the
    crossings is a dot lattice that puts energy on the diagonals too.
    """
    if period is None:
        period = int(rng.integers(GRID_PERIODS[0], GRID_PERIODS[1] + 1))
    if period < 2:
        raise ValueError(f"grid period must be >= 2, got {period}")
    oy, ox = rng.integers(period, size=2)
    idx = np.arange(side)
    rows = ((idx - oy) % period == 0)[:, None]
    cols = ((idx - ox) % period == 0)[None, :]
    grid = 0.5 * (rows | cols) + 1.0 * (rows & cols)
    return grid - grid.mean()


def fake_like(rng: np.random.Generator, side: int = IMAGE_SIDE, period: int | None = None) -> np.ndarray:
    rgb = real_like(rng, side)
    amp = rng.uniform(*GRID_AMPLITUDE)
    rgb = rgb * (1.0 + amp * grid_pattern(rng, side, period)[:, :, None])
    return np.clip(rgb, 0.0, 1.0)


def save_png(path, rgb: np.ndarray) -> None:
    Image.fromarray(np.round(rgb * 255).astype(np.uint8), mode="RGB").save(path)


def generate_corpus(out_dir, n_train: int = 400, n_test: int = 200, seed: int = 0,
                    side: int = IMAGE_SIDE) -> dict[str, Path]:
    """Write balanced train/test PNG sets and their ``path,label`` manifests.

    Returns the manifest paths keyed by split name.
    """
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    manifests = {}
    for split, count in (("train", n_train), ("test", n_test)):
        split_dir = out_dir / split
        split_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for i in range(count):
            label = "real" if i % 2 == 0 else "fake"
            img = real_like(rng, side) if label == "real" else fake_like(rng, side)
            name = f"{split}_{i:04d}_{label}.png"
            save_png(split_dir / name, img)
            rows.append(f"{split}/{name},{label}")
        manifest = out_dir / f"{split}.csv"
        manifest.write_text("path,label\n" + "\n".join(rows) + "\n", encoding="ascii")
        manifests[split] = manifest
    return manifests

"""Difference-of-Gaussians blob detection on spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .spectrum import Spectrum

MIN_SIGMA = 11.0
MAX_SIGMA = 30.0
SIGMA_RATIO = 1.8
THRESHOLD = 0.05
OVERLAP = 0.5


@dataclass(frozen=True)
class Blob:
    y: int
    x: int
    sigma: float
    response: float


@dataclass(frozen=True)
class BlobSet:
    blobs: tuple[Blob, ...] = field(default=())

    @property
    def count(self) -> int:
        return len(self.blobs)

    def __len__(self) -> int:
        return len(self.blobs)

    def __iter__(self):
        return iter(self.blobs)


def sigma_ladder(min_sigma: float = MIN_SIGMA, max_sigma: float = MAX_SIGMA,
                 ratio: float = SIGMA_RATIO) -> np.ndarray:
    """Geometric scales from ``min_sigma`` up to and including the first one above ``max_sigma``."""
    if min_sigma <= 0:
        raise ValueError(f"min_sigma must be positive, got {min_sigma}")
    if ratio <= 1:
        raise ValueError(f"ratio must exceed 1, got {ratio}")
    if max_sigma < min_sigma:
        raise ValueError(f"max_sigma ({max_sigma}) < min_sigma ({min_sigma})")
    sigmas = [float(min_sigma)]
    while sigmas[-1] <= max_sigma:
        sigmas.append(sigmas[-1] * ratio)
    return np.array(sigmas)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(img, sigma, mode="reflect", radius=math.ceil(3 * sigma))


def dog_stack(img: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Scale-normalized DoG layers, shape ``(len(sigmas) - 1, H, W)``."""
    blurred = [gaussian_blur(img, s) for s in sigmas]
    layers = [
        (blurred[j] - blurred[j + 1]) * sigmas[j] / (sigmas[j + 1] - sigmas[j])
        for j in range(len(sigmas) - 1)
    ]
    return np.stack(layers)


def local_maxima(stack: np.ndarray, threshold: float) -> np.ndarray:
    """Indices ``(layer, y, x)`` strictly above every available 3x3x3 neighbour and ``threshold``."""
    footprint = np.ones((3, 3, 3), dtype=bool)
    footprint[1, 1, 1] = False
    neighbour_max = ndimage.maximum_filter(stack, footprint=footprint, mode="constant", cval=-np.inf)
    return np.argwhere((stack > neighbour_max) & (stack > threshold))


def disc_overlap(r1: float, r2: float, d: float) -> float:
    """Intersection area of two discs as a fraction of the smaller disc's area."""
    small = min(r1, r2)
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return 1.0
    a1 = r1**2 * math.acos((d**2 + r1**2 - r2**2) / (2 * d * r1))
    a2 = r2**2 * math.acos((d**2 + r2**2 - r1**2) / (2 * d * r2))
    a3 = 0.5 * math.sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    return (a1 + a2 - a3) / (math.pi * small**2)


def prune_blobs(blobs: list[Blob], overlap: float = OVERLAP) -> list[Blob]:
    """Greedily keep the strongest blobs, dropping any that overlap a kept one too much."""
    kept: list[Blob] = []
    for b in sorted(blobs, key=lambda b: (-b.response, b.y, b.x, b.sigma)):
        rb = b.sigma * math.sqrt(2)
        if all(disc_overlap(rb, k.sigma * math.sqrt(2), math.hypot(b.y - k.y, b.x - k.x)) <= overlap
               for k in kept):
            kept.append(b)
    return kept


def detect_blobs(spec: Spectrum | np.ndarray, min_sigma: float = MIN_SIGMA,
                 max_sigma: float = MAX_SIGMA, ratio: float = SIGMA_RATIO,
                 threshold: float = THRESHOLD, overlap: float = OVERLAP) -> BlobSet:
    img = spec.data if isinstance(spec, Spectrum) else np.asarray(spec, dtype=float)
    sigmas = sigma_ladder(min_sigma, max_sigma, ratio)
    stack = dog_stack(img, sigmas)
    found = [
        Blob(int(y), int(x), float(sigmas[j]), float(stack[j, y, x]))
        for j, y, x in local_maxima(stack, threshold)
    ]
    kept = prune_blobs(found, overlap)
    kept.sort(key=lambda b: (b.y, b.x, b.sigma))
    return BlobSet(tuple(kept))


def blob_count_feature(blobs: BlobSet) -> float:
    return float(blobs.count)


def write_blobs_csv(path, blobs: BlobSet) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("y,x,sigma,response\n")
        for b in blobs:
            fh.write(f"{b.y},{b.x},{b.sigma!r},{b.response!r}\n")

"""Pipeline configuration with the published defaults."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import blob, classifier, fisher_encoding, oriented_gradients

FEATURE_NAMES = ("stat", "hog", "blob")


@dataclass(frozen=True)
class PipelineConfig:
    image_side: int = 256
    smooth_size: int = oriented_gradients.SMOOTH_SIZE
    smooth_sigma: float = oriented_gradients.SMOOTH_SIGMA
    orientations: int = oriented_gradients.N_ORIENTATIONS
    cell_size: int = oriented_gradients.CELL_SIZE
    block_size: int = oriented_gradients.BLOCK_SIZE
    window_size: int = oriented_gradients.BLOCK_SIZE
    n_components: int = fisher_encoding.N_COMPONENTS
    em_tol: float = fisher_encoding.EM_TOL
    em_max_iter: int = fisher_encoding.EM_MAX_ITER
    var_floor: float = fisher_encoding.VAR_FLOOR
    blob_min_sigma: float = blob.MIN_SIGMA
    blob_max_sigma: float = blob.MAX_SIGMA
    blob_ratio: float = blob.SIGMA_RATIO
    blob_threshold: float = blob.THRESHOLD
    c_grid: tuple = classifier.DEFAULT_C_GRID
    gamma_grid: tuple = classifier.DEFAULT_GAMMA_GRID
    cv_folds: int = 5
    svm_tol: float = classifier.KKT_TOL
    svm_max_iter: int = classifier.MAX_ITER
    class_weight: str = "none"
    features: tuple = FEATURE_NAMES
    seed: int = 0

    def __post_init__(self):
        # JSON gives lists; keep the dataclass hashable and comparable
        for name in ("c_grid", "gamma_grid", "features"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        def need(ok, msg):
            if not ok:
                raise ValueError(f"invalid config: {msg}")

        need(self.image_side >= 8 and self.image_side % 4 == 0, "image_side must be >= 8 and divisible by 4")
        need(self.smooth_size >= 1 and self.smooth_size % 2 == 1, "smooth_size must be odd")
        need(self.smooth_sigma > 0, "smooth_sigma must be positive")
        need(self.orientations >= 2, "orientations must be >= 2")
        need(self.cell_size >= 1 and (self.image_side // 4) % self.cell_size == 0,
             "cell_size must divide the cropped quarter side")
        need(self.block_size % self.cell_size == 0, "block_size must be a multiple of cell_size")
        need(self.window_size >= self.block_size, "window_size must be >= block_size")
        need(self.n_components >= 1, "n_components must be >= 1")
        need(self.em_tol > 0 and self.em_max_iter >= 1, "EM tolerance/iterations must be positive")
        need(self.var_floor > 0, "var_floor must be positive")
        need(self.blob_min_sigma > 0, "blob_min_sigma must be positive")
        need(self.blob_max_sigma >= self.blob_min_sigma, "blob_max_sigma must be >= blob_min_sigma")
        need(self.blob_ratio > 1, "blob_ratio must exceed 1")
        need(self.blob_threshold >= 0, "blob_threshold must be non-negative")
        need(len(self.c_grid) > 0 and all(c > 0 for c in self.c_grid), "c_grid must be non-empty and positive")
        need(len(self.gamma_grid) > 0 and all(g > 0 for g in self.gamma_grid),
             "gamma_grid must be non-empty and positive")
        need(self.cv_folds >= 2, "cv_folds must be >= 2")
        need(self.svm_tol > 0 and self.svm_max_iter >= 1, "SVM tolerance/iterations must be positive")
        need(self.class_weight in ("none", "balanced"), "class_weight must be 'none' or 'balanced'")
        need(len(self.features) > 0 and set(self.features) <= set(FEATURE_NAMES)
             and len(set(self.features)) == len(self.features),
             f"features must be a non-empty subset of {FEATURE_NAMES}")
        need(self.seed >= 0, "seed must be non-negative")

    @property
    def uses(self):
        return set(self.features)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for name in ("c_grid", "gamma_grid", "features"):
            d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path=None, **overrides) -> PipelineConfig:
    """Defaults, then values from a JSON file, then non-None ``overrides``."""
    values = {}
    if path is not None:
        values.update(json.loads(Path(path).read_text(encoding="utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig.from_dict(values)


def write_default_config(path) -> None:
    Path(path).write_text(json.dumps(PipelineConfig().to_dict(), indent=2) + "\n", encoding="utf-8")

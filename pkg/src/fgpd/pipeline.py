"""End-to-end orchestration: manifests, feature extraction, training, prediction and reports."""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import blob, classifier, evaluation, fisher_encoding, oriented_gradients, spectrum
from .config import PipelineConfig
from .stat_features import flatten, statistical_feature

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
LABELS = {"real": classifier.REAL, "fake": classifier.FAKE}
LABEL_NAMES = {v: k for k, v in LABELS.items()}

ABLATION_SUBSETS = (
    ("stat",),
    ("hog",),
    ("hog", "blob"),
    ("stat", "hog"),
    ("stat", "blob"),
    ("stat", "hog", "blob"),
)


class BundleError(ValueError):
    pass


# -- manifests ---------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    path: str
    label: int
    split: str | None = None


@dataclass(frozen=True)
class DatasetManifest:
    samples: tuple[Sample, ...]

    @property
    def paths(self) -> list[str]:
        return [s.path for s in self.samples]

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def __len__(self) -> int:
        return len(self.samples)


def read_manifest(path) -> DatasetManifest:
    """Parse a ``path,label[,split]`` CSV; relative image paths resolve against the manifest's folder."""
    path = Path(path)
    base = path.parent
    samples = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"path", "label"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: manifest header must contain 'path,label'")
        for lineno, row in enumerate(reader, start=2):
            label = (row["label"] or "").strip().lower()
            if label not in LABELS:
                raise ValueError(f"{path}:{lineno}: label must be 'real' or 'fake', got {row['label']!r}")
            p = Path(row["path"].strip())
            p = str(p if p.is_absolute() else base / p)
            if p in seen:
                raise ValueError(f"{path}:{lineno}: duplicate path {p}")
            seen.add(p)
            samples.append(Sample(p, LABELS[label], (row.get("split") or None)))
    return DatasetManifest(tuple(samples))


def write_manifest(path, samples: Sequence[Sample]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("path,label\n")
        for s in samples:
            fh.write(f"{s.path},{LABEL_NAMES[s.label]}\n")


# -- per-image features ------------------------------------------------------

@dataclass(frozen=True)
class ImageFeatures:
    """Everything extracted from one image before the GMM exists."""
    path: str
    stat: np.ndarray          # (4,)
    descriptors: np.ndarray   # (n_cells, orientations)
    blob_count: float


@dataclass(frozen=True)
class Failure:
    path: str
    reason: str


def image_features(path: str, config: PipelineConfig) -> ImageFeatures:
    spec = spectrum.image_spectrum(path, config.image_side)
    stat = statistical_feature(flatten(spec)).as_array()
    quarter = oriented_gradients.preprocess_spectrum(spec, config.smooth_size, config.smooth_sigma)
    desc = oriented_gradients.hog_descriptors(quarter, config.cell_size, config.block_size,
                                              config.orientations)
    blobs = blob.detect_blobs(spec, config.blob_min_sigma, config.blob_max_sigma,
                              config.blob_ratio, config.blob_threshold)
    return ImageFeatures(path, stat, desc, blob.blob_count_feature(blobs))


def _extract_one(args):
    path, config = args
    try:
        return image_features(path, config)
    except (spectrum.ImageLoadError, OSError, ValueError) as exc:
        return Failure(path, str(exc))


def extract_raw(paths: Sequence[str], config: PipelineConfig, jobs: int = 1):
    """Features per path in input order, plus the failures that were skipped."""
    if len(paths) == 0:
        raise ValueError("no images to process")
    work = [(p, config) for p in paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        results = [_extract_one(w) for w in work]
    feats = [r for r in results if isinstance(r, ImageFeatures)]
    failures = [r for r in results if isinstance(r, Failure)]
    for f in failures:
        log.warning("skipping %s: %s", f.path, f.reason)
    return feats, failures


def fisher_dim(config: PipelineConfig) -> int:
    return 2 * config.n_components * config.orientations


def feature_columns(config: PipelineConfig) -> np.ndarray:
    """Column indices of the full ``[stat | fisher | blob]`` layout kept by ``config.features``."""
    fd = fisher_dim(config)
    spans = {
        "stat": range(0, classifier.STAT_DIM),
        "hog": range(classifier.STAT_DIM, classifier.STAT_DIM + fd),
        "blob": range(classifier.STAT_DIM + fd, classifier.STAT_DIM + fd + 1),
    }
    return np.array([i for name in ("stat", "hog", "blob") if name in config.uses for i in spans[name]],
                    dtype=int)


def feature_matrix(feats: Sequence[ImageFeatures], gmm, config: PipelineConfig) -> np.ndarray:
    """Assembled features restricted to the configured subset, one row per image."""
    fd = fisher_dim(config)
    rows = []
    for f in feats:
        fv = fisher_encoding.fisher_vector(gmm, f.descriptors) if gmm is not None else np.zeros(fd)
        rows.append(classifier.assemble_feature(f.stat, fv, f.blob_count, fisher_dim=fd))
    return np.array(rows)[:, feature_columns(config)]


# -- model bundle ------------------------------------------------------------

@dataclass(frozen=True)
class ModelBundle:
    config: PipelineConfig
    gmm: fisher_encoding.GmmModel | None
    standardizer: classifier.Standardizer
    svm: classifier.SvmModel
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "gmm": self.gmm.to_dict() if self.gmm is not None else None,
            "standardizer": self.standardizer.to_dict(),
            "svm": self.svm.to_dict(),
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise BundleError(f"unsupported bundle format_version {version!r} (expected {FORMAT_VERSION})")
        return cls(
            config=PipelineConfig.from_dict(d["config"]),
            gmm=fisher_encoding.GmmModel.from_dict(d["gmm"]) if d.get("gmm") else None,
            standardizer=classifier.Standardizer.from_dict(d["standardizer"]),
            svm=classifier.SvmModel.from_dict(d["svm"]),
            summary=d.get("summary", {}),
        )


def _dump(obj, out: list, indent: int, level: int = 0) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for n, (k, v) in enumerate(obj.items()):
            out.append(f'{pad}{_json_str(str(k))}: ')
            _dump(v, out, indent, level + 1)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            out.append("[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        out.append("[\n")
        for n, v in enumerate(obj):
            out.append(pad)
            _dump(v, out, indent, level + 1)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _json_str(s: str) -> str:
    return json.dumps(s)


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"cannot serialize non-finite value {v}")
        return format(float(v), ".17g")
    return _json_str(str(v))


def bundle_text(bundle: ModelBundle) -> str:
    """JSON text with every float written to 17 significant digits."""
    out: list[str] = []
    _dump(bundle.to_dict(), out, indent=1)
    return "".join(out) + "\n"


def save_bundle(bundle: ModelBundle, path) -> None:
    Path(path).write_text(bundle_text(bundle), encoding="utf-8")


def load_bundle(path) -> ModelBundle:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read bundle {path}: {exc}") from exc
    return ModelBundle.from_dict(d)


# -- training / prediction ---------------------------------------------------

def train_from_features(feats: Sequence[ImageFeatures], labels, config: PipelineConfig,
                        failures: Sequence[Failure] = ()) -> ModelBundle:
    labels = np.asarray(labels, dtype=int)
    if len(feats) != len(labels):
        raise ValueError("features and labels differ in length")
    n_real = int(np.sum(labels == classifier.REAL))
    n_fake = int(np.sum(labels == classifier.FAKE))
    if n_real == 0 or n_fake == 0:
        raise ValueError(f"training needs both classes (real={n_real}, fake={n_fake})")

    gmm = None
    if "hog" in config.uses:
        pooled = np.concatenate([f.descriptors for f in feats])
        gmm = fisher_encoding.fit_gmm(pooled, config.n_components, config.seed, config.em_tol,
                                      config.em_max_iter, config.var_floor)
    X = feature_matrix(feats, gmm, config)
    std = classifier.fit_standardizer(X)
    Z = std.apply(X)
    C, gamma, cv_acc = classifier.grid_search(
        Z, labels, config.c_grid, config.gamma_grid, config.cv_folds, config.seed,
        config.svm_tol, config.svm_max_iter, config.class_weight)
    svm = classifier.train_svm(Z, labels, C, gamma, config.seed, config.svm_tol,
                               config.svm_max_iter, config.class_weight)
    summary = {
        "n_real": n_real,
        "n_fake": n_fake,
        "n_failed": len(failures),
        "feature_dim": int(X.shape[1]),
        "cv_accuracy": cv_acc,
        "C": C,
        "gamma": gamma,
        "n_support_vectors": int(svm.dual_coef.size),
        "training_paths": [f.path for f in feats],
    }
    return ModelBundle(config, gmm, std, svm, summary)


def train_pipeline(manifest: DatasetManifest, config: PipelineConfig, jobs: int = 1):
    """Returns the trained bundle and the list of skipped images."""
    feats, failures = extract_raw(manifest.paths, config, jobs)
    by_path = {s.path: s.label for s in manifest.samples}
    labels = [by_path[f.path] for f in feats]
    return train_from_features(feats, labels, config, failures), failures


def score_features(bundle: ModelBundle, feats: Sequence[ImageFeatures]) -> np.ndarray:
    X = feature_matrix(feats, bundle.gmm, bundle.config)
    return classifier.decision_values(bundle.svm, bundle.standardizer.apply(X))


@dataclass(frozen=True)
class Prediction:
    path: str
    label: int | None
    score: float | None
    error: str | None = None


def predict_paths(bundle: ModelBundle, paths: Sequence[str], jobs: int = 1) -> list[Prediction]:
    feats, failures = extract_raw(list(paths), bundle.config, jobs)
    scores = score_features(bundle, feats) if feats else np.array([])
    scored = {f.path: float(s) for f, s in zip(feats, scores)}
    failed = {f.path: f.reason for f in failures}
    out = []
    for p in paths:
        if p in scored:
            s = scored[p]
            out.append(Prediction(p, int(classifier.labels_from_scores(s)), s))
        else:
            out.append(Prediction(p, None, None, failed.get(p, "unknown error")))
    return out


def write_predictions_csv(path, preds: Sequence[Prediction]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("path,label,score,error\n")
        for p in preds:
            if p.error is None:
                fh.write(f"{p.path},{LABEL_NAMES[p.label]},{p.score!r},\n")
            else:
                fh.write(f"{p.path},,,{p.error.replace(',', ';')}\n")


def overlap_warning(test_paths, train_paths) -> str | None:
    shared = set(test_paths) & set(train_paths)
    if shared:
        return f"{len(shared)} test path(s) also appear in the training set"
    return None


@dataclass
class EvaluationResult:
    report: dict
    roc: evaluation.RocCurve
    confusion: evaluation.ConfusionMatrix
    failures: list
    warnings: list


def evaluate_features(bundle: ModelBundle, feats, labels) -> tuple[dict, evaluation.RocCurve,
                                                                    evaluation.ConfusionMatrix]:
    labels = np.asarray(labels, dtype=int)
    scores = score_features(bundle, feats)
    cm = evaluation.confusion(labels, classifier.labels_from_scores(scores))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        curve = evaluation.roc(labels, scores)
        report = evaluation.metrics_report(cm, curve.auc)
    return report, curve, cm


def evaluate_dataset(bundle: ModelBundle, manifest: DatasetManifest, jobs: int = 1) -> EvaluationResult:
    if len(manifest) == 0:
        raise ValueError("empty test manifest")
    notes = []
    msg = overlap_warning(manifest.paths, bundle.summary.get("training_paths", []))
    if msg:
        warnings.warn(msg, UserWarning)
        notes.append(msg)
    feats, failures = extract_raw(manifest.paths, bundle.config, jobs)
    by_path = {s.path: s.label for s in manifest.samples}
    labels = [by_path[f.path] for f in feats]
    report, curve, cm = evaluate_features(bundle, feats, labels)
    report["n_failed"] = len(failures)
    return EvaluationResult(report, curve, cm, failures, notes)


# -- ablation ----------------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    features: tuple
    feature_dim: int
    acc: float
    f1: float
    auc: float
    cv_accuracy: float


def ablation(train: DatasetManifest, test: DatasetManifest, config: PipelineConfig, jobs: int = 1,
             subsets=ABLATION_SUBSETS) -> tuple[list[AblationRow], list[str]]:
    """Train and test one model per feature subset; features are extracted once and shared."""
    notes = []
    msg = overlap_warning(test.paths, train.paths)
    if msg:
        warnings.warn(msg, UserWarning)
        notes.append(msg)
    train_feats, train_fail = extract_raw(train.paths, config, jobs)
    test_feats, test_fail = extract_raw(test.paths, config, jobs)
    train_labels = dict((s.path, s.label) for s in train.samples)
    test_labels = dict((s.path, s.label) for s in test.samples)
    y_train = [train_labels[f.path] for f in train_feats]
    y_test = [test_labels[f.path] for f in test_feats]
    rows = []
    for subset in subsets:
        cfg = config.replace(features=tuple(subset))
        bundle = train_from_features(train_feats, y_train, cfg, train_fail)
        report, _, _ = evaluate_features(bundle, test_feats, y_test)
        rows.append(AblationRow(tuple(subset), bundle.summary["feature_dim"], report["acc"], report["f1"],
                                report["auc"], bundle.summary["cv_accuracy"]))
    return rows, notes


def format_ablation(rows: Sequence[AblationRow]) -> str:
    """Subset membership marks, one column per run, in the Acc/F1 table layout."""
    names = {"stat": "Statistical", "hog": "Oriented gradient", "blob": "Blob"}
    width = 19
    lines = []
    for key in ("stat", "hog", "blob"):
        marks = "".join(f"{'x' if key in r.features else '':>8}" for r in rows)
        lines.append(f"{names[key]:<{width}}{marks}")
    lines.append("-" * (width + 8 * len(rows)))
    lines.append(f"{'Acc (%)':<{width}}" + "".join(f"{100 * r.acc:>8.2f}" for r in rows))
    lines.append(f"{'F1 (%)':<{width}}" + "".join(f"{100 * r.f1:>8.2f}" for r in rows))
    lines.append(f"{'AUC':<{width}}" + "".join(f"{r.auc:>8.4f}" for r in rows))
    return "\n".join(lines) + "\n"


def write_ablation_csv(path, rows: Sequence[AblationRow]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("features,feature_dim,acc,f1,auc,cv_accuracy\n")
        for r in rows:
            fh.write(f"{'+'.join(r.features)},{r.feature_dim},{r.acc!r},{r.f1!r},{r.auc!r},"
                     f"{r.cv_accuracy!r}\n")


# -- diagnostics -------------------------------------------------------------

def inspect(manifest: DatasetManifest, config: PipelineConfig, out_dir) -> dict:
    """Per-class averaged spectra and diagonal profiles, plus every image's detected blobs.

    Returns ``{class name: averaged Spectrum}``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_class: dict[str, list] = {"real": [], "fake": []}
    blob_rows = []
    for s in manifest.samples:
        try:
            spec = spectrum.image_spectrum(s.path, config.image_side)
        except spectrum.ImageLoadError as exc:
            log.warning("skipping %s: %s", s.path, exc)
            continue
        per_class[LABEL_NAMES[s.label]].append(spec)
        found = blob.detect_blobs(spec, config.blob_min_sigma, config.blob_max_sigma,
                                  config.blob_ratio, config.blob_threshold)
        blob_rows.extend((s.path, b) for b in found)
    present = {k: v for k, v in per_class.items() if v}
    if not present:
        raise ValueError("no readable images in manifest")
    averaged = {}
    for name, specs in present.items():
        avg = spectrum.average_spectra(specs)
        averaged[name] = avg
        spectrum.write_matrix_csv(out_dir / f"avg_spectrum_{name}.csv", avg.data)
        spectrum.write_spectrum_png(out_dir / f"avg_spectrum_{name}.png", avg)
        if avg.height == avg.width:
            spectrum.write_matrix_csv(out_dir / f"diagonal_{name}.csv", spectrum.diagonal_profile(avg)[:, None])
    with open(out_dir / "blobs.csv", "w", encoding="utf-8") as fh:
        fh.write("path,y,x,sigma,response\n")
        for path, b in blob_rows:
            fh.write(f"{path},{b.y},{b.x},{b.sigma!r},{b.response!r}\n")
    return averaged


def write_feature_table(path, feats: Sequence[ImageFeatures], labels=None, bundle: ModelBundle | None = None):
    """CSV keyed by path: assembled features if a bundle is given, raw extraction otherwise."""
    with open(path, "w", encoding="utf-8") as fh:
        if bundle is not None:
            X = feature_matrix(feats, bundle.gmm, bundle.config)
            header = [f"f{i}" for i in range(X.shape[1])]
        else:
            X = np.array([np.concatenate([f.stat, f.descriptors.ravel(), [f.blob_count]]) for f in feats])
            n_desc = feats[0].descriptors.size if feats else 0
            header = (["mean", "std", "skewness", "kurtosis"]
                      + [f"hog{i}" for i in range(n_desc)] + ["blob_count"])
        cols = ["path"] + (["label"] if labels is not None else []) + header
        fh.write(",".join(cols) + "\n")
        for n, (f, row) in enumerate(zip(feats, X)):
            lead = [f.path] + ([LABEL_NAMES[int(labels[n])]] if labels is not None else [])
            fh.write(",".join(lead + [repr(float(v)) for v in row]) + "\n")

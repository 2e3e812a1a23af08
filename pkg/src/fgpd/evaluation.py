"""Accuracy, F1, confusion counts and ROC/AUC with real paintings as the positive class."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _labels(labels) -> np.ndarray:
    labels = np.asarray(labels).ravel()
    if not set(np.unique(labels)) <= {1, -1}:
        raise ValueError("labels must be +1 (real) or -1 (fake)")
    return labels


def confusion(labels, predictions) -> ConfusionMatrix:
    labels = _labels(labels)
    predictions = _labels(predictions)
    if labels.size != predictions.size:
        raise ValueError(f"{labels.size} labels but {predictions.size} predictions")
    if labels.size == 0:
        raise ValueError("empty input")
    pos, pred_pos = labels == 1, predictions == 1
    return ConfusionMatrix(
        tp=int(np.sum(pos & pred_pos)),
        fp=int(np.sum(~pos & pred_pos)),
        tn=int(np.sum(~pos & ~pred_pos)),
        fn=int(np.sum(pos & ~pred_pos)),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def f1(cm: ConfusionMatrix) -> float:
    denom = 2 * cm.tp + cm.fp + cm.fn
    if denom == 0:
        warnings.warn("F1 undefined (no positives predicted or present); reporting 0", RuntimeWarning)
        return 0.0
    return 2 * cm.tp / denom


def roc(labels, scores) -> RocCurve:
    """ROC points over the distinct score values, ties grouped, with trapezoidal AUC."""
    labels = _labels(labels)
    scores = np.asarray(scores, dtype=float).ravel()
    if labels.size != scores.size:
        raise ValueError(f"{labels.size} labels but {scores.size} scores")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")

    order = np.argsort(-scores, kind="mergesort")
    s, pos = scores[order], labels[order] == 1
    # last index of every group of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(pos)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def metrics_report(cm: ConfusionMatrix, auc: float | None = None) -> dict:
    out = {"acc": accuracy(cm), "f1": f1(cm), "tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn,
           "n": cm.total}
    if auc is not None:
        out["auc"] = auc
    return out


def format_report(report: dict) -> str:
    lines = []
    for key, value in report.items():
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_roc_csv(path, curve: RocCurve) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("fpr,tpr\n")
        for x, y in curve.points:
            fh.write(f"{x!r},{y!r}\n")

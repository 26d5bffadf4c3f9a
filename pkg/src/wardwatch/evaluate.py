"""Evaluation metrics and the modality-ablation comparison table.

AUROC is computed twice by design: a trapezoidal integration over the
tie-grouped ROC curve for production use, and an O(n^2) pairwise
Mann-Whitney statistic kept as a verification oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputValidationError, UndefinedMetricError
from .features import MODALITIES, FeatureMatrix
from .model import (
    HyperParams,
    SplitSpec,
    chronological_split,
    grid_search,
)

DEFAULT_ABLATION_SETS: tuple[tuple[str, ...], ...] = (
    ("tabular",),
    ("timeseries",),
    ("text",),
    MODALITIES,
)


def _check_scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if scores.shape != labels.shape:
        raise InputValidationError(
            f"scores and labels differ in length: {scores.shape} vs {labels.shape}"
        )
    return scores, labels


def auroc(scores, labels) -> float:
    """Area under the ROC curve by trapezoidal integration, ties grouped."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC is undefined for single-class labels")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1.0 - y)
    # keep one ROC point per distinct score (the end of each tie block)
    block_end = np.append(s[:-1] != s[1:], True)
    tpr = np.concatenate([[0.0], tp[block_end] / n_pos])
    fpr = np.concatenate([[0.0], fp[block_end] / n_neg])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) * 0.5))


def auroc_pairwise(scores, labels) -> float:
    """Probability a random positive outranks a random negative, ties at 1/2."""
    scores, labels = _check_scores_labels(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("AUROC is undefined for single-class labels")
    greater = (pos[:, None] > neg[None, :]).sum()
    equal = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * equal) / (pos.size * neg.size))


@dataclass(frozen=True)
class ThresholdMetrics:
    threshold: float
    sensitivity: float
    specificity: float
    precision: float
    tp: int
    fp: int
    tn: int
    fn: int
    no_predicted_positives: bool = False

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "precision": self.precision,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "no_predicted_positives": self.no_predicted_positives,
        }


def threshold_sweep(scores, labels, thresholds: Sequence[float]) -> list[ThresholdMetrics]:
    """Confusion-matrix metrics at each threshold; a row is flagged positive
    when its score is strictly greater than the threshold."""
    scores, labels = _check_scores_labels(scores, labels)
    thresholds = list(thresholds)
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise InputValidationError("thresholds must be sorted ascending")

    out = []
    pos = labels == 1
    for t in thresholds:
        flagged = scores > t
        tp = int(np.sum(flagged & pos))
        fp = int(np.sum(flagged & ~pos))
        fn = int(np.sum(~flagged & pos))
        tn = int(np.sum(~flagged & ~pos))
        no_pred = tp + fp == 0
        out.append(
            ThresholdMetrics(
                threshold=float(t),
                sensitivity=tp / (tp + fn) if tp + fn else 0.0,
                specificity=tn / (tn + fp) if tn + fp else 0.0,
                precision=tp / (tp + fp) if not no_pred else 0.0,
                tp=tp,
                fp=fp,
                tn=tn,
                fn=fn,
                no_predicted_positives=no_pred,
            )
        )
    return out


@dataclass(frozen=True)
class CalibrationBin:
    mean_score: float | None
    event_rate: float | None
    count: int


def calibration_curve(scores, labels, n_bins: int = 10) -> list[CalibrationBin]:
    """Equal-width reliability bins on [0, 1]; empty bins carry count 0 and
    undefined (None) rates."""
    if n_bins < 2:
        raise InputValidationError("calibration needs at least 2 bins")
    scores, labels = _check_scores_labels(scores, labels)
    idx = np.minimum((scores * n_bins).astype(int), n_bins - 1)
    bins = []
    for b in range(n_bins):
        hit = idx == b
        count = int(hit.sum())
        if count == 0:
            bins.append(CalibrationBin(mean_score=None, event_rate=None, count=0))
        else:
            bins.append(
                CalibrationBin(
                    mean_score=float(scores[hit].mean()),
                    event_rate=float(labels[hit].mean()),
                    count=count,
                )
            )
    return bins


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) series for plotting, one point per distinct score."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC is undefined for single-class labels")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    block_end = np.append(s[:-1] != s[1:], True)
    tpr = np.concatenate([[0.0], np.cumsum(y)[block_end] / n_pos])
    fpr = np.concatenate([[0.0], np.cumsum(1.0 - y)[block_end] / n_neg])
    return fpr, tpr


def export_plot_data(scores, labels, thresholds: Sequence[float], n_bins: int = 10) -> dict:
    """x/y series for the ROC, threshold-sweep, and calibration figures."""
    fpr, tpr = roc_points(scores, labels)
    sweep = threshold_sweep(scores, labels, thresholds)
    calib = calibration_curve(scores, labels, n_bins)
    return {
        "roc": {"fpr": fpr.tolist(), "tpr": tpr.tolist()},
        "sweep": {
            "threshold": [m.threshold for m in sweep],
            "sensitivity": [m.sensitivity for m in sweep],
            "specificity": [m.specificity for m in sweep],
            "precision": [m.precision for m in sweep],
        },
        "calibration": {
            "mean_score": [b.mean_score for b in calib],
            "event_rate": [b.event_rate for b in calib],
            "count": [b.count for b in calib],
        },
    }


# ---------------------------------------------------------------------------
# Modality ablation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AblationCell:
    modalities: tuple[str, ...]
    kind: str
    test_auroc: float
    n_features: int
    best: HyperParams

    def to_dict(self) -> dict:
        return {
            "modalities": list(self.modalities),
            "kind": self.kind,
            "test_auroc": self.test_auroc,
            "n_features": self.n_features,
            "best": self.best.to_dict(),
        }


def ablation_table(
    fm: FeatureMatrix,
    kinds: Sequence[str],
    modality_sets: Sequence[tuple[str, ...]] | None = None,
    split_spec: SplitSpec | None = None,
    grid: Sequence[HyperParams] | None = None,
    seed: int = 0,
) -> list[AblationCell]:
    """Train and test one grid-searched model per (modality set, kind)."""
    if modality_sets is None:
        modality_sets = DEFAULT_ABLATION_SETS
    for mods in modality_sets:
        if not mods:
            raise InputValidationError("a modality set must be non-empty")

    train_fm, val_fm, test_fm = chronological_split(fm, split_spec)
    cells = []
    for mods in modality_sets:
        train_v = train_fm.modality_view(mods)
        val_v = val_fm.modality_view(mods)
        test_v = test_fm.modality_view(mods)
        for kind in kinds:
            result = grid_search(train_v, val_v, kind, grid=grid, seed=seed)
            cells.append(
                AblationCell(
                    modalities=tuple(mods),
                    kind=kind,
                    test_auroc=auroc(result.model.predict_proba(test_v.X), test_v.y),
                    n_features=len(train_v.manifest),
                    best=result.best,
                )
            )
    return cells


def render_ablation_table(cells: Sequence[AblationCell]) -> str:
    header = f"{'modalities':<28} {'model':<18} {'features':>8} {'test AUROC':>10}"
    lines = [header, "-" * len(header)]
    for cell in cells:
        lines.append(
            f"{'+'.join(cell.modalities):<28} {cell.kind:<18} "
            f"{cell.n_features:>8d} {cell.test_auroc:>10.3f}"
        )
    return "\n".join(lines)


def cells_to_json(cells: Sequence[AblationCell]) -> str:
    return json.dumps([c.to_dict() for c in cells], indent=2, sort_keys=True)

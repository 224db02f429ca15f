"""Confusion-matrix accumulation and the three evaluation criteria:
pixel accuracy, mean (classwise) accuracy, and intersection-over-union."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .core import IGNORE_LABEL, LabelMap


class UndefinedMetricError(ValueError):
    """Metric requested on an empty confusion matrix."""


class ConfusionMatrix:
    """counts[i, j] = pixels of true class i predicted as class j."""

    def __init__(self, num_classes: int, counts: Optional[np.ndarray] = None):
        if num_classes < 1:
            raise ValueError("need at least one class")
        self.num_classes = num_classes
        if counts is None:
            self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        else:
            arr = np.asarray(counts, dtype=np.int64)
            if arr.shape != (num_classes, num_classes):
                raise ValueError(f"counts must be {num_classes}x{num_classes}")
            if (arr < 0).any():
                raise ValueError("counts must be non-negative")
            self.counts = arr.copy()

    def copy(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.num_classes, self.counts)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValueError("class counts differ")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ConfusionMatrix)
            and other.num_classes == self.num_classes
            and bool((other.counts == self.counts).all())
        )


def accumulate(cm: ConfusionMatrix, pred: LabelMap, gt: LabelMap) -> ConfusionMatrix:
    """Add one image's prediction/ground-truth pair into cm (in place).

    Ground-truth pixels labeled IGNORE_LABEL are skipped. Returns cm so
    calls can be chained; accumulation over images is order-independent.
    """
    if pred.labels.shape != gt.labels.shape:
        raise ValueError("prediction and ground truth dimensions differ")
    k = cm.num_classes
    gt_flat = np.asarray(gt.labels).ravel()
    pred_flat = np.asarray(pred.labels).ravel()
    keep = gt_flat != IGNORE_LABEL
    gt_kept = gt_flat[keep]
    pred_kept = pred_flat[keep]
    if gt_kept.size and int(gt_kept.max()) >= k:
        raise ValueError(f"ground-truth label {int(gt_kept.max())} out of range for k={k}")
    if pred_kept.size and (int(pred_kept.max()) >= k or (pred_kept == IGNORE_LABEL).any()):
        raise ValueError("prediction contains labels out of range")
    flat = gt_kept.astype(np.int64) * k + pred_kept.astype(np.int64)
    cm.counts += np.bincount(flat, minlength=k * k).reshape(k, k)
    return cm


def _require_total(cm: ConfusionMatrix) -> None:
    if cm.counts.sum() == 0:
        raise UndefinedMetricError("confusion matrix is empty")


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correctly classified pixels."""
    _require_total(cm)
    return float(np.trace(cm.counts) / cm.counts.sum())


def mean_accuracy(cm: ConfusionMatrix) -> float:
    """Classwise accuracy averaged over classes present in the ground truth."""
    _require_total(cm)
    t = cm.counts.sum(axis=1)
    present = t > 0
    if not present.any():
        raise UndefinedMetricError("no class present in the ground truth")
    diag = np.diag(cm.counts)
    return float((diag[present] / t[present]).mean())


def classwise_iou(cm: ConfusionMatrix) -> np.ndarray:
    """Per-class IoU; NaN for classes absent from both gt and prediction.

    union = gt pixels of the class + pixels predicted as the class
    - the intersection.
    """
    _require_total(cm)
    diag = np.diag(cm.counts).astype(np.float64)
    gt_total = cm.counts.sum(axis=1).astype(np.float64)
    pred_total = cm.counts.sum(axis=0).astype(np.float64)
    union = gt_total + pred_total - diag
    out = np.full(cm.num_classes, np.nan)
    nz = union > 0
    out[nz] = diag[nz] / union[nz]
    return out


def mean_iou(cm: ConfusionMatrix) -> float:
    """IoU averaged over classes present in gt or prediction."""
    ious = classwise_iou(cm)
    valid = ~np.isnan(ious)
    if not valid.any():
        raise UndefinedMetricError("no class present")
    return float(ious[valid].mean())

"""MAE and threshold-swept precision / recall / F-measure."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

NUM_THRESHOLDS = 256
BETA2 = 0.3
THRESHOLDS = np.arange(NUM_THRESHOLDS) / 255.0


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute error per image, then averaged over images (leading axis)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if pred.ndim <= 2:
        return float(np.abs(pred - gt).mean())
    per_image = np.abs(pred - gt).reshape(pred.shape[0], -1).mean(axis=1)
    return float(per_image.mean())


def precision_recall(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall of ``pred >= k/255`` for k = 0..255 on one image.

    Precision is 1 where nothing is predicted positive.
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    fg = np.asarray(gt).reshape(-1) > 0.5
    all_sorted = np.sort(pred)
    fg_sorted = np.sort(pred[fg])
    positives = all_sorted.size - np.searchsorted(all_sorted, THRESHOLDS, side="left")
    tp = fg_sorted.size - np.searchsorted(fg_sorted, THRESHOLDS, side="left")
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(positives > 0, tp / np.maximum(positives, 1), 1.0)
        recall = tp / fg.sum() if fg.any() else np.zeros(NUM_THRESHOLDS)
    return precision, recall


def f_beta(precision: np.ndarray, recall: np.ndarray, beta2: float = BETA2) -> np.ndarray:
    num = (1 + beta2) * precision * recall
    den = beta2 * precision + recall
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


@dataclass
class MetricReport:
    mae: float
    precision: np.ndarray
    recall: np.ndarray
    f: np.ndarray
    max_f: float
    mean_f: float
    images: int = 0
    images_with_foreground: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("threshold,precision,recall,f\n")
        for t, p, r, f in zip(THRESHOLDS, self.precision, self.recall, self.f):
            buf.write(f"{t:.6f},{p:.6f},{r:.6f},{f:.6f}\n")
        buf.write(f"summary,mae={self.mae:.6f},max_f={self.max_f:.6f},mean_f={self.mean_f:.6f}\n")
        return buf.getvalue()


def f_measure_curve(preds, gts, beta2: float = BETA2) -> MetricReport:
    """Aggregate metrics over a list of images.

    Precision and recall are averaged per threshold over images that contain
    foreground, then combined into F.  Every image counts towards MAE.
    """
    if isinstance(preds, np.ndarray) and preds.ndim <= 2:
        preds, gts = [preds], [gts]
    precisions, recalls, maes = [], [], []
    for pred, gt in zip(preds, gts):
        maes.append(mae(pred, gt))
        if np.asarray(gt).max() > 0.5:
            p, r = precision_recall(pred, gt)
            precisions.append(p)
            recalls.append(r)
    if precisions:
        precision = np.mean(precisions, axis=0)
        recall = np.mean(recalls, axis=0)
    else:
        precision = np.ones(NUM_THRESHOLDS)
        recall = np.zeros(NUM_THRESHOLDS)
    f = f_beta(precision, recall, beta2)
    return MetricReport(float(np.mean(maes)) if maes else 0.0, precision, recall, f,
                        float(f.max()), float(f.mean()), len(maes), len(precisions))

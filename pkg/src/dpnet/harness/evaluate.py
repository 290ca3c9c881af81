"""Inference and dataset evaluation against a checkpoint."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.augment import resize_array
from ..data.netpbm import read_image, write_image
from ..data.synthetic import SIZE_CLASSES, read_manifest
from ..metrics import MetricReport, f_measure_curve
from ..model import DPNet
from .train import predict_batches


def predict_probability(model: DPNet, image: np.ndarray, size: int) -> np.ndarray:
    """Resize to ``size x size``, predict, and resize the probability map back to the input size."""
    h, w = image.shape[-2:]
    x = resize_array(image, size, size) if (h, w) != (size, size) else image
    prob = predict_batches(model, x)
    if (h, w) != (size, size):
        prob = np.clip(resize_array(prob, h, w), 0.0, 1.0)
    return prob


def infer(model: DPNet, size: int, image_path, out_path) -> np.ndarray:
    prob = predict_probability(model, read_image(image_path), size)
    write_image(out_path, prob[:, :1])
    return prob


@dataclass
class EvalResult:
    overall: MetricReport
    per_class: dict
    missing: list = field(default_factory=list)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write("subset,images,mae,max_f,mean_f\n")
        for name, rep in [("all", self.overall)] + list(self.per_class.items()):
            buf.write(f"{name},{rep.images},{rep.mae:.6f},{rep.max_f:.6f},{rep.mean_f:.6f}\n")
        return buf.getvalue()

    def curves_csv(self) -> str:
        buf = io.StringIO()
        buf.write("subset,threshold,precision,recall,f\n")
        for name, rep in [("all", self.overall)] + list(self.per_class.items()):
            for line in rep.to_csv().splitlines()[1:-1]:
                buf.write(f"{name},{line}\n")
        return buf.getvalue()


def aggregate(preds, gts, classes) -> EvalResult:
    per_class = {}
    for cls in SIZE_CLASSES:
        idx = [i for i, c in enumerate(classes) if c == cls]
        if idx:
            per_class[cls] = f_measure_curve([preds[i] for i in idx], [gts[i] for i in idx])
    return EvalResult(f_measure_curve(preds, gts), per_class)


def evaluate(model: DPNet, size: int, dataset_root, predictor=None) -> EvalResult:
    """Score every manifest entry; unreadable files are listed in ``missing`` and skipped.

    ``predictor(image) -> probability map`` replaces the model when given.
    """
    root = Path(dataset_root)
    preds, gts, classes, missing = [], [], [], []
    for row in read_manifest(root):
        i = row["index"]
        try:
            image = read_image(root / "img" / f"{i:05d}.ppm")
            gt = (read_image(root / "gt" / f"{i:05d}.pgm") > 0.5).astype(np.float64)
        except (OSError, ValueError) as exc:
            missing.append(f"{i:05d}: {exc}")
            continue
        prob = predictor(image) if predictor else predict_probability(model, image, size)
        preds.append(prob[0, 0])
        gts.append(gt[0, 0])
        classes.append(row["size_class"])
    result = aggregate(preds, gts, classes)
    result.missing = missing
    return result

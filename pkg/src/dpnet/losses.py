"""Boundary-weighted BCE and IoU losses with multi-level supervision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import ShapeError, Tensor

AUX_LEVELS = (2, 3, 4, 5)
BOX_WINDOW = 15
EDGE_GAIN = 5.0


def box_mean(x: np.ndarray, window: int = BOX_WINDOW) -> np.ndarray:
    """Same-size mean over a ``window x window`` box, averaging only in-bounds pixels.

    Works on ``(..., h, w)`` arrays via 2-D summed-area tables.
    """
    r = window // 2
    h, w = x.shape[-2:]
    pad = [(0, 0)] * (x.ndim - 2) + [(1, 0), (1, 0)]
    sat = np.pad(x.cumsum(-2).cumsum(-1), pad)
    ones = np.pad(np.ones((h, w)).cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    top = np.clip(np.arange(h) - r, 0, h)
    bot = np.clip(np.arange(h) + r + 1, 0, h)
    left = np.clip(np.arange(w) - r, 0, w)
    right = np.clip(np.arange(w) + r + 1, 0, w)

    def rect(s):
        return (s[..., bot[:, None], right[None, :]] - s[..., top[:, None], right[None, :]]
                - s[..., bot[:, None], left[None, :]] + s[..., top[:, None], left[None, :]])

    return rect(sat) / rect(ones)


def pixel_weights(gt: np.ndarray, window: int = BOX_WINDOW, gain: float = EDGE_GAIN) -> np.ndarray:
    """``1 + gain * |boxmean(gt) - gt|``: weight grows near object boundaries."""
    gt = np.asarray(gt, dtype=np.float64)
    if not np.all((gt == 0) | (gt == 1)):
        raise ValueError("ground truth must be binary (values 0 or 1)")
    return 1.0 + gain * np.abs(box_mean(gt, window) - gt)


def weighted_bce(logits: Tensor, gt: np.ndarray, w: np.ndarray) -> Tensor:
    """Per-image ``sum(w * bce) / sum(w)``, averaged over the batch."""
    if logits.shape != gt.shape or gt.shape != w.shape:
        raise ShapeError(f"weighted_bce: logits {logits.shape}, gt {gt.shape}, w {w.shape} must match")
    per_pixel = ops.bce_with_logits(logits, gt) * w
    per_image = ops.sum(per_pixel, axis=(1, 2, 3)) / w.sum(axis=(1, 2, 3))
    return ops.mean(per_image)


def weighted_iou(logits: Tensor, gt: np.ndarray, w: np.ndarray) -> Tensor:
    """Per-image ``1 - sum(w p gt) / sum(w (p + gt - p gt))``, averaged over the batch."""
    if logits.shape != gt.shape or gt.shape != w.shape:
        raise ShapeError(f"weighted_iou: logits {logits.shape}, gt {gt.shape}, w {w.shape} must match")
    p = ops.sigmoid(logits)
    inter = ops.sum(p * (w * gt), axis=(1, 2, 3))
    union = ops.sum(p * (w * (1.0 - gt)) + w * gt, axis=(1, 2, 3))
    # a doubly-empty image (union == 0) counts as perfect agreement
    empty = union.data == 0
    safe_union = union + empty.astype(np.float64)
    ratio = inter / safe_union + empty.astype(np.float64)
    return ops.mean(1.0 - ratio)


def aux_coefficient(level: int) -> float:
    return 1.0 / 2 ** (level - 1)


@dataclass
class LossBreakdown:
    total: Tensor
    final: list  # (wbce, wiou) floats per final map
    aux: list    # (wbce, wiou) floats per auxiliary level


def total_loss(final_maps, aux_maps, gt: np.ndarray, w: np.ndarray | None = None) -> LossBreakdown:
    """Mean of the final-map losses plus ``sum_j 2^-(j-1)`` weighted auxiliary losses for j = 2..5."""
    if len(final_maps) < 1:
        raise ValueError("at least one final map is required")
    if len(aux_maps) != len(AUX_LEVELS):
        raise ValueError(f"expected {len(AUX_LEVELS)} auxiliary maps (levels 2..5), got {len(aux_maps)}")
    if w is None:
        w = pixel_weights(gt)
    final_parts, aux_parts = [], []
    total = None
    for logits in final_maps:
        b, i = weighted_bce(logits, gt, w), weighted_iou(logits, gt, w)
        final_parts.append((b.item(), i.item()))
        term = (b + i) * (1.0 / len(final_maps))
        total = term if total is None else total + term
    for level, logits in zip(AUX_LEVELS, aux_maps):
        b, i = weighted_bce(logits, gt, w), weighted_iou(logits, gt, w)
        aux_parts.append((b.item(), i.item()))
        total = total + (b + i) * aux_coefficient(level)
    return LossBreakdown(total, final_parts, aux_parts)

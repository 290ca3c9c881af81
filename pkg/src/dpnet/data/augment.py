"""Training-time augmentation: horizontal flip, random crop, multi-scale resize.

Masks go through the same geometric transform as images and are
re-binarised at 0.5 after any resampling.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from ..ops import bilinear_matrix
from .synthetic import Sample

DEFAULT_SCALES = (0.75, 1.0, 1.25)


def resize_array(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = arr.shape[-2:]
    if (h, w) == (out_h, out_w):
        return arr.copy()
    return np.matmul(bilinear_matrix(h, out_h), arr @ bilinear_matrix(w, out_w).T)


def _binarize(mask: np.ndarray) -> np.ndarray:
    return (mask >= 0.5).astype(np.float64)


def hflip(sample: Sample) -> Sample:
    return replace(sample, image=sample.image[..., ::-1].copy(), mask=sample.mask[..., ::-1].copy())


def crop_resize(sample: Sample, top: int, left: int, height: int, width: int) -> Sample:
    h, w = sample.image.shape[-2:]
    box = (..., slice(top, top + height), slice(left, left + width))
    image = resize_array(sample.image[box], h, w)
    mask = _binarize(resize_array(sample.mask[box], h, w))
    return replace(sample, image=np.clip(image, 0.0, 1.0), mask=mask)


def rescale(sample: Sample, out_h: int, out_w: int) -> Sample:
    image = resize_array(sample.image, out_h, out_w)
    mask = _binarize(resize_array(sample.mask, out_h, out_w))
    return replace(sample, image=np.clip(image, 0.0, 1.0), mask=mask)


def snapped_size(base: int, scale: float, multiple: int) -> int:
    """``scale * base`` rounded half-up to a positive multiple of ``multiple``."""
    return max(multiple, int(np.floor(scale * base / multiple + 0.5)) * multiple)


def augment(sample: Sample, seed: int, flip_prob: float = 0.5, crop_min: float = 0.875,
            scales: Sequence[float] = DEFAULT_SCALES, size_multiple: int = 32,
            scale: Optional[float] = None) -> Sample:
    """Flip, crop to a random 87.5-100% window and resize back, then rescale.

    ``scale`` overrides the random draw from ``scales`` so that a whole batch
    can share one output size.  The output side is snapped to a multiple of
    ``size_multiple`` (the encoder needs multiples of 32).
    """
    rng = np.random.default_rng(seed)
    flip = rng.random() < flip_prob
    frac_h, frac_w = rng.uniform(crop_min, 1.0, size=2)
    off_h, off_w = rng.random(2)
    drawn = scales[int(rng.integers(len(scales)))]
    scale = drawn if scale is None else scale

    out = hflip(sample) if flip else sample
    h, w = out.image.shape[-2:]
    ch, cw = max(1, int(round(frac_h * h))), max(1, int(round(frac_w * w)))
    if (ch, cw) != (h, w):
        out = crop_resize(out, int(off_h * (h - ch + 1)) if ch < h else 0,
                          int(off_w * (w - cw + 1)) if cw < w else 0, ch, cw)
    if scale == 1.0:
        return out
    out_h, out_w = snapped_size(h, scale, size_multiple), snapped_size(w, scale, size_multiple)
    if (out_h, out_w) != (h, w):
        out = rescale(out, out_h, out_w)
    return out

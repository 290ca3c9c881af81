"""Mean routing weight per kernel size and encoder stage as the input is enlarged."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ..backbone import INPUT_MULTIPLE
from ..data.augment import resize_array, snapped_size
from ..model import INPUT_MEAN, INPUT_STD, DPNet
from ..tensor import no_grad

DEFAULT_SCALES = (1.0, 1.5, 2.0)


def stage_routing(model: DPNet, images: np.ndarray, batch_size: int = 16) -> dict:
    """``{level: (m,) mean alpha per branch}`` from the last DPConv block of each stage."""
    last = {}
    for level, _, block in model.encoder.dpconv_blocks():
        last[level] = block
    sums = {lvl: 0.0 for lvl in last}
    with no_grad():
        for i in range(0, len(images), batch_size):
            x = images[i:i + batch_size]
            model.encoder((x - INPUT_MEAN) * (1.0 / INPUT_STD))
            for lvl, block in last.items():
                alpha = block.last_alpha.reshape(len(x), -1, block.spec.m)  # slot-major layout
                sums[lvl] = sums[lvl] + alpha.mean(axis=1).sum(axis=0)
    return {lvl: s / len(images) for lvl, s in sums.items()}


@dataclass
class RoutingRow:
    stage: int
    kernel: int
    scale: float
    mean_weight: float


def routing_report(model: DPNet, images: np.ndarray, scales=DEFAULT_SCALES) -> list[RoutingRow]:
    kernels = model.config.encoder.kernel_sizes
    h, w = images.shape[-2:]
    rows = []
    for scale in scales:
        oh, ow = snapped_size(h, scale, INPUT_MULTIPLE), snapped_size(w, scale, INPUT_MULTIPLE)
        x = resize_array(images, oh, ow) if (oh, ow) != (h, w) else images
        for lvl, means in stage_routing(model, np.clip(x, 0.0, 1.0)).items():
            rows.extend(RoutingRow(lvl, k, scale, float(v)) for k, v in zip(kernels, means))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("stage,kernel,scale,mean_weight\n")
    for r in rows:
        buf.write(f"{r.stage},{r.kernel},{r.scale:g},{r.mean_weight:.9f}\n")
    return buf.getvalue()


@dataclass
class DirectionCheck:
    large_up_stages: int
    small_down_stages: int
    stages: int

    @property
    def holds(self) -> bool:
        need = self.stages - 1 if self.stages > 1 else 1
        return self.large_up_stages >= need and self.small_down_stages >= need


def direction_check(rows, low: float = 1.0, high: float = 2.0) -> DirectionCheck:
    """Count stages where the largest kernel gains weight and the smallest does not, from ``low`` to ``high``."""
    table = {(r.stage, r.kernel, r.scale): r.mean_weight for r in rows}
    stages = sorted({r.stage for r in rows})
    kernels = sorted({r.kernel for r in rows})
    small, large = kernels[0], kernels[-1]
    up = sum(table[(s, large, high)] >= table[(s, large, low)] for s in stages)
    down = sum(table[(s, small, high)] <= table[(s, small, low)] for s in stages)
    return DirectionCheck(up, down, len(stages))

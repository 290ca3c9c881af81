"""Bidirectional cross-scale fusion decoder with dynamic weighted fusion.

All pyramid levels are projected to a common width ``d``.  A BiCFM block does a
top-down sweep (level 5 -> 2) followed by a bottom-up sweep (level 2 -> 5),
fusing pairs of features with a cross fusion module, and adds the block input
back onto every output level.  ``N`` such blocks are stacked.  The last block's
pyramid is fused across levels with input-dependent per-channel weights.

CFM internals are a reconstruction: two multiplicative crossings followed by
an output convolution,

    L' = L + L * c_l(V);   V' = V + V * c_v(L);   out = c_o(L' + V')

where each ``c`` is a 3x3 convolution + ReLU.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ops
from .backbone import LEVELS
from .nn import Conv2d, ConvReLU, Linear, Module
from .tensor import ConfigError, ShapeError, Tensor

Pyramid = dict  # level -> Tensor


def _hw(t: Tensor) -> tuple[int, int]:
    return t.shape[2], t.shape[3]


# Crossings start close to the identity.  Without normalisation layers a
# full-gain crossing squares feature magnitudes at every fusion and the
# stacked sweeps overflow at initialisation.
CROSS_GAIN = 0.1


class CFM(Module):
    def __init__(self, d: int, rng: np.random.Generator):
        self.cross_lateral = ConvReLU(d, d, 3, rng, gain=CROSS_GAIN)   # applied to the vertical input
        self.cross_vertical = ConvReLU(d, d, 3, rng, gain=CROSS_GAIN)  # applied to the lateral input
        self.out = ConvReLU(d, d, 3, rng, gain=np.sqrt(0.5))

    def forward(self, lateral: Tensor, vertical: Tensor) -> Tensor:
        if lateral.shape != vertical.shape:
            raise ShapeError(f"CFM inputs differ: lateral {lateral.shape} vs vertical {vertical.shape}")
        lat = lateral + lateral * self.cross_lateral(vertical)
        ver = vertical + vertical * self.cross_vertical(lateral)
        return self.out(lat + ver)


def cfm_fuse(cfm: CFM, lateral: Tensor, vertical: Tensor) -> Tensor:
    return cfm(lateral, vertical)


class BiCFM(Module):
    def __init__(self, d: int, rng: np.random.Generator):
        self.top = ConvReLU(d, d, 3, rng)
        self.top_down = {lvl: CFM(d, rng) for lvl in (4, 3, 2)}
        self.down = {lvl: ConvReLU(d, d, 3, rng, stride=2) for lvl in (3, 4, 5)}
        self.bottom_up = {lvl: CFM(d, rng) for lvl in (3, 4, 5)}

    def forward(self, pyramid: Pyramid) -> tuple[Pyramid, Pyramid]:
        """Return ``(output pyramid, top-down fused pyramid)``."""
        missing = [lvl for lvl in LEVELS if lvl not in pyramid]
        if missing:
            raise ShapeError(f"BiCFM needs pyramid levels {LEVELS}, missing {missing}")
        fused = {5: self.top(pyramid[5])}
        for lvl in (4, 3, 2):
            q = ops.resize_bilinear(fused[lvl + 1], *_hw(pyramid[lvl]))
            fused[lvl] = self.top_down[lvl](pyramid[lvl], q)
        v = {2: fused[2]}
        for lvl in (3, 4, 5):
            down = self.down[lvl](v[lvl - 1])
            if _hw(down) != _hw(fused[lvl]):
                down = ops.resize_bilinear(down, *_hw(fused[lvl]))
            v[lvl] = self.bottom_up[lvl](fused[lvl], down)
        out = {lvl: v[lvl] + pyramid[lvl] for lvl in LEVELS}
        return out, fused


def bicfm_pass(block: BiCFM, pyramid: Pyramid) -> Pyramid:
    return block(pyramid)[0]


def stack_bicfm(blocks: list[BiCFM], pyramid: Pyramid) -> list[tuple[Pyramid, Pyramid]]:
    """Apply the blocks in sequence; returns ``(output, top-down fused)`` for each block."""
    if len(blocks) < 1:
        raise ConfigError("at least one BiCFM block is required")
    results = []
    for block in blocks:
        out, fused = block(pyramid)
        results.append((out, fused))
        pyramid = out
    return results


class DWF(Module):
    """Dynamic weighted fusion with independent routing MLPs per target level."""

    def __init__(self, d: int, rng: np.random.Generator, targets=(2,), softmax_mode: str = "slot",
                 hidden: Optional[int] = None):
        self.d = d
        self.softmax_mode = softmax_mode
        k = len(LEVELS)
        hidden = hidden or max(k * d // 4, k)
        self.mlps = {j: [Linear(k * d, hidden, rng), Linear(hidden, k * d, rng)] for j in targets}
        self.last_omega: dict[int, np.ndarray] = {}

    def weights(self, resized: list[Tensor], target: int) -> Tensor:
        """``omega`` of shape ``(n, 4d)``; entry ``c * 4 + i`` weights source level ``LEVELS[i]`` in channel ``c``."""
        n = resized[0].shape[0]
        k = len(LEVELS)
        p = ops.reshape(ops.global_avg_pool(ops.concat(resized, axis=1)), (n, k * self.d))
        fc1, fc2 = self.mlps[target]
        mode = "segment" if self.softmax_mode == "slot" else "whole"
        return ops.segment_softmax(fc2(ops.relu(fc1(p))), k, mode)

    def forward(self, pyramid: Pyramid, target: int = 2) -> Tensor:
        if target not in self.mlps:
            raise ConfigError(f"DWF has no parameters for target level {target}")
        hw = _hw(pyramid[target])
        resized = [ops.resize_bilinear(pyramid[lvl], *hw) for lvl in LEVELS]
        omega = self.weights(resized, target)
        self.last_omega[target] = omega.data
        n, k, d = omega.shape[0], len(LEVELS), self.d
        by_level = ops.reshape(ops.transpose(ops.reshape(omega, (n, d, k)), (0, 2, 1)), (n, k, d, 1, 1))
        stacked = ops.reshape(ops.concat(resized, axis=1), (n, k, d) + hw)
        return ops.sum(stacked * by_level, axis=1)


def dwf_fuse(dwf: DWF, pyramid: Pyramid, target: int = 2) -> Tensor:
    return dwf(pyramid, target)


class PredictHead(Module):
    def __init__(self, d: int, rng: np.random.Generator):
        self.conv = Conv2d(d, 1, 3, rng, gain=0.5)

    def forward(self, feature: Tensor, out_hw: tuple[int, int]) -> Tensor:
        return ops.resize_bilinear(self.conv(feature), *out_hw)


def predict_head(head: PredictHead, feature: Tensor, out_hw: tuple[int, int]) -> Tensor:
    return head(feature, out_hw)


@dataclass
class DecoderOutput:
    final_maps: list  # N logit maps; index 0 comes from the DWF of the last block
    aux_maps: list    # logit maps for levels 2..5 of the last block's top-down sweep
    pyramids: list = field(default_factory=list)


class Decoder(Module):
    def __init__(self, in_channels: dict, d: int, num_blocks: int, rng: np.random.Generator,
                 softmax_mode: str = "slot"):
        if num_blocks < 1:
            raise ConfigError(f"num_blocks must be >= 1, got {num_blocks}")
        self.lateral = {lvl: ConvReLU(in_channels[lvl], d, 1, rng, padding=0) for lvl in LEVELS}
        self.blocks = [BiCFM(d, rng) for _ in range(num_blocks)]
        self.dwf = DWF(d, rng, targets=(2,), softmax_mode=softmax_mode)
        self.final_heads = [PredictHead(d, rng) for _ in range(num_blocks)]
        self.aux_heads = {lvl: PredictHead(d, rng) for lvl in LEVELS}

    def forward(self, features: Pyramid, out_hw: tuple[int, int]) -> DecoderOutput:
        pyramid = {lvl: self.lateral[lvl](features[lvl]) for lvl in LEVELS}
        results = stack_bicfm(self.blocks, pyramid)
        last_out, last_fused = results[-1]
        finals = [self.final_heads[-1](self.dwf(last_out, 2), out_hw)]
        for u, (out, _) in enumerate(results[:-1]):
            finals.append(self.final_heads[u](out[2], out_hw))
        aux = [self.aux_heads[lvl](last_fused[lvl], out_hw) for lvl in LEVELS]
        return DecoderOutput(finals, aux, [r[0] for r in results])

"""Five-stage residual encoder built from DPConv blocks.

The stem is a stride-2 3x3 convolution; stages 2..5 each start with a
stride-2 block.  The outputs of stages 2..5 form the feature pyramid, so an
``H x W`` image yields levels at ``H/4, H/8, H/16, H/32``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ops
from .dpconv import DEFAULT_KERNELS, DPConvBlock, DPConvSpec, default_groups
from .nn import Conv2d, ConvReLU, Module
from .tensor import ConfigError, ShapeError, Tensor

LEVELS = (2, 3, 4, 5)
INPUT_MULTIPLE = 32


@dataclass
class EncoderConfig:
    stem_channels: int = 16
    stage_channels: tuple = (16, 32, 64, 64)
    blocks_per_stage: tuple = (1, 1, 1, 1)
    kernel_sizes: tuple = DEFAULT_KERNELS
    groups: Optional[tuple] = None  # None: per-block default from default_groups()
    reference_k: int = 3
    mlp_hidden: Optional[int] = None
    softmax_mode: str = "slot"
    block_type: str = "dpconv"  # or "static": plain 3x3 residual blocks

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.blocks_per_stage = tuple(int(b) for b in self.blocks_per_stage)
        self.kernel_sizes = tuple(int(k) for k in self.kernel_sizes)
        if len(self.stage_channels) != 4 or len(self.blocks_per_stage) != 4:
            raise ConfigError("stage_channels and blocks_per_stage need exactly 4 entries (levels 2..5)")
        if any(b < 1 for b in self.blocks_per_stage):
            raise ConfigError("every stage needs at least one block")
        if self.block_type not in ("dpconv", "static"):
            raise ConfigError(f"unknown block_type {self.block_type!r}")
        if self.block_type == "dpconv":
            m = len(self.kernel_sizes)
            bad = [c for c in self.stage_channels if c % m]
            if bad:
                raise ConfigError(f"stage widths {bad} are not divisible by the branch count m={m}")

    def block_specs(self) -> list[list[DPConvSpec]]:
        specs = []
        c_in = self.stem_channels
        for c_out, nblocks in zip(self.stage_channels, self.blocks_per_stage):
            stage = []
            for b in range(nblocks):
                cin = c_in if b == 0 else c_out
                groups = self.groups
                if groups is None:
                    groups = default_groups(self.kernel_sizes, self.reference_k, cin, c_out // len(self.kernel_sizes))
                stage.append(DPConvSpec(cin, c_out, self.kernel_sizes, groups, self.reference_k,
                                        self.mlp_hidden, stride=2 if b == 0 else 1,
                                        softmax_mode=self.softmax_mode))
            specs.append(stage)
            c_in = c_out
        return specs


class StaticBlock(Module):
    """Baseline residual unit: one 3x3 convolution plus (projected) identity."""

    def __init__(self, c_in: int, c_out: int, stride: int, rng: np.random.Generator):
        self.conv = Conv2d(c_in, c_out, 3, rng, stride=stride, bias=False)
        self.shortcut = None
        if c_in != c_out or stride != 1:
            self.shortcut = Conv2d(c_in, c_out, 1, rng, stride=stride, padding=0, bias=False)

    def forward(self, x: Tensor) -> Tensor:
        residual = x if self.shortcut is None else self.shortcut(x)
        return residual + self.conv(x)


class Encoder(Module):
    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.config = config
        self.stem = ConvReLU(3, config.stem_channels, 3, rng, stride=2)
        self.stages = []
        if config.block_type == "dpconv":
            for stage_specs in config.block_specs():
                self.stages.append([DPConvBlock(s, rng) for s in stage_specs])
        else:
            c_in = config.stem_channels
            for c_out, nblocks in zip(config.stage_channels, config.blocks_per_stage):
                self.stages.append([StaticBlock(c_in if b == 0 else c_out, c_out, 2 if b == 0 else 1, rng)
                                    for b in range(nblocks)])
                c_in = c_out

    def dpconv_blocks(self) -> list[tuple[int, int, DPConvBlock]]:
        """``(level, index_in_stage, block)`` for every DPConv block."""
        return [(level, i, blk) for level, stage in zip(LEVELS, self.stages)
                for i, blk in enumerate(stage) if isinstance(blk, DPConvBlock)]

    def forward(self, image: Tensor) -> dict[int, Tensor]:
        if image.ndim != 4 or image.shape[1] != 3:
            raise ShapeError(f"encoder expects (n, 3, h, w) images, got {image.shape}")
        h, w = image.shape[2:]
        if h % INPUT_MULTIPLE or w % INPUT_MULTIPLE:
            raise ConfigError(f"image size {h}x{w} must be a multiple of {INPUT_MULTIPLE} in both dimensions")
        x = self.stem(image)
        pyramid = {}
        for level, stage in zip(LEVELS, self.stages):
            for block in stage:
                x = ops.relu(block(x))
            pyramid[level] = x
        return pyramid


def encode(config: EncoderConfig, image: Tensor, rng: Optional[np.random.Generator] = None,
           encoder: Optional[Encoder] = None) -> dict[int, Tensor]:
    """Run ``image`` through ``encoder`` (or a freshly initialised one built from ``config``)."""
    if encoder is None:
        encoder = Encoder(config, rng if rng is not None else np.random.default_rng(0))
    return encoder(image)

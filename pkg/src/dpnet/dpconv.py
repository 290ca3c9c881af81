"""Dynamic pyramid convolution.

A block runs ``m`` grouped convolutions with increasing kernel sizes in
parallel, each producing ``c_out / m`` channels, and mixes them with weights
computed from the block input:

    Z     = GAP(x)
    alpha = softmax(FC2(ReLU(FC1(Z))))          # per slot across the m branches
    Y     = shortcut(x) + Concat_i(alpha_i * conv_i(x))

``alpha`` has ``c_out`` entries laid out as ``c_out / m`` slots of ``m``
branch weights; entry ``s * m + i`` scales output channel ``s`` of branch ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import ops
from .nn import Conv2d, Linear, Module
from .tensor import ConfigError, ShapeError, Tensor

DEFAULT_KERNELS = (3, 5, 7, 9)
SOFTMAX_MODES = {"slot": "segment", "whole": "whole"}


def default_groups(kernel_sizes: Sequence[int], reference_k: int = 3,
                   c_in: Optional[int] = None, branch_out: Optional[int] = None) -> tuple[int, ...]:
    """Smallest power of two strictly above ``(K_i / K)^2``, halved until it divides the channels."""
    groups = []
    for k in kernel_sizes:
        g = 1
        while g * reference_k ** 2 <= k ** 2:
            g *= 2
        while g > 1 and ((c_in is not None and c_in % g) or (branch_out is not None and branch_out % g)):
            g //= 2
        groups.append(g)
    return tuple(groups)


@dataclass
class DPConvSpec:
    c_in: int
    c_out: int
    kernel_sizes: tuple = DEFAULT_KERNELS
    groups: Optional[tuple] = None
    reference_k: int = 3
    mlp_hidden: Optional[int] = None
    stride: int = 1
    softmax_mode: str = "slot"

    def __post_init__(self):
        self.kernel_sizes = tuple(int(k) for k in self.kernel_sizes)
        m = len(self.kernel_sizes)
        if m < 1:
            raise ConfigError("at least one kernel size is required")
        if any(k < 1 or k % 2 == 0 for k in self.kernel_sizes):
            raise ConfigError(f"kernel sizes must be odd and positive, got {self.kernel_sizes}")
        if any(b <= a for a, b in zip(self.kernel_sizes, self.kernel_sizes[1:])):
            raise ConfigError(f"kernel sizes must be strictly increasing, got {self.kernel_sizes}")
        if self.c_in < 1 or self.c_out < 1 or self.stride < 1 or self.reference_k < 1:
            raise ConfigError("channels, stride and reference kernel must be positive")
        if self.c_out % m:
            raise ConfigError(f"c_out={self.c_out} is not divisible by the branch count m={m}")
        if self.groups is None:
            self.groups = default_groups(self.kernel_sizes, self.reference_k, self.c_in, self.branch_out)
        self.groups = tuple(int(g) for g in self.groups)
        if len(self.groups) != m:
            raise ConfigError(f"{len(self.groups)} group sizes given for {m} kernels")
        for g in self.groups:
            if g < 1 or self.c_in % g or self.branch_out % g:
                raise ConfigError(
                    f"group size {g} must divide c_in={self.c_in} and c_out/m={self.branch_out}")
        if self.mlp_hidden is None:
            self.mlp_hidden = max(self.c_in // 4, m)
        if self.softmax_mode not in SOFTMAX_MODES:
            raise ConfigError(f"softmax_mode must be one of {sorted(SOFTMAX_MODES)}")

    @property
    def m(self) -> int:
        return len(self.kernel_sizes)

    @property
    def branch_out(self) -> int:
        return self.c_out // len(self.kernel_sizes)


def count_params_standard(c_in: int, c_out: int, k: int) -> int:
    return c_out * c_in * k * k


def count_params_pyramid(spec: DPConvSpec) -> int:
    return sum(spec.branch_out * (spec.c_in // g) * k * k for k, g in zip(spec.kernel_sizes, spec.groups))


@dataclass(frozen=True)
class LightweightVerdict:
    holds: bool
    margins: tuple  # g_i - (K_i / K)^2 per branch
    pyramid: int
    standard: int

    def __bool__(self) -> bool:
        return self.holds


def check_lightweight(spec: DPConvSpec) -> LightweightVerdict:
    """Sufficient condition ``g_i > (K_i / K)^2`` for every branch, evaluated in integers."""
    ref2 = spec.reference_k ** 2
    holds = all(g * ref2 > k * k for k, g in zip(spec.kernel_sizes, spec.groups))
    margins = tuple(g - (k / spec.reference_k) ** 2 for k, g in zip(spec.kernel_sizes, spec.groups))
    return LightweightVerdict(holds, margins, count_params_pyramid(spec),
                              count_params_standard(spec.c_in, spec.c_out, spec.reference_k))


class DPConvBlock(Module):
    def __init__(self, spec: DPConvSpec, rng: np.random.Generator):
        self.spec = spec
        self.branches = [
            Conv2d(spec.c_in, spec.branch_out, k, rng, stride=spec.stride, groups=g, bias=False)
            for k, g in zip(spec.kernel_sizes, spec.groups)
        ]
        self.fc1 = Linear(spec.c_in, spec.mlp_hidden, rng)
        self.fc2 = Linear(spec.mlp_hidden, spec.c_out, rng)
        self.shortcut = None
        if spec.c_in != spec.c_out or spec.stride != 1:
            self.shortcut = Conv2d(spec.c_in, spec.c_out, 1, rng, stride=spec.stride, padding=0, bias=False)
        self.last_alpha: Optional[np.ndarray] = None

    def _check(self, x: Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.spec.c_in:
            raise ShapeError(f"DPConv block expects (n, {self.spec.c_in}, h, w), got {x.shape}")

    def pyramid_forward(self, x: Tensor) -> list[Tensor]:
        self._check(x)
        return [branch(x) for branch in self.branches]

    def routing_weights(self, x: Tensor) -> Tensor:
        self._check(x)
        n = x.shape[0]
        z = ops.reshape(ops.global_avg_pool(x), (n, self.spec.c_in))
        logits = self.fc2(ops.relu(self.fc1(z)))
        return ops.segment_softmax(logits, self.spec.m, SOFTMAX_MODES[self.spec.softmax_mode])

    def branch_scales(self, alpha: Tensor) -> Tensor:
        """Reorder slot-major ``alpha`` to the branch-major channel order of the concatenation."""
        n = alpha.shape[0]
        m, s = self.spec.m, self.spec.branch_out
        by_branch = ops.transpose(ops.reshape(alpha, (n, s, m)), (0, 2, 1))
        return ops.reshape(by_branch, (n, self.spec.c_out, 1, 1))

    def forward(self, x: Tensor) -> Tensor:
        ys = self.pyramid_forward(x)
        alpha = self.routing_weights(x)
        self.last_alpha = alpha.data
        body = ops.concat(ys, axis=1) * self.branch_scales(alpha)
        residual = x if self.shortcut is None else self.shortcut(x)
        return residual + body

    def weight_count(self) -> int:
        """Enumerated length of the branch weight buffers."""
        return sum(b.weight.data.size for b in self.branches)

"""Learning-rate schedule and SGD with momentum and coupled weight decay."""

from __future__ import annotations

import numpy as np


def lr_schedule(step: int, total_steps: int, lr_max: float, warmup_fraction: float = 0.1) -> float:
    """Linear warm-up to ``lr_max`` over the first ``warmup_fraction`` of steps, then linear decay to 0."""
    warmup = warmup_fraction * total_steps
    if warmup > 0 and step < warmup:
        return lr_max * step / warmup
    if step >= total_steps:
        return 0.0
    return lr_max * (total_steps - step) / (total_steps - warmup)


def sgd_step(params, grads, momentum_buffers, lr: float, momentum: float, weight_decay: float) -> None:
    """In-place update of ``params`` (arrays) and ``momentum_buffers``."""
    for theta, g, v in zip(params, grads, momentum_buffers):
        g = g + weight_decay * theta if weight_decay else g
        v *= momentum
        v += g
        theta -= lr * v


class SGD:
    """Two parameter groups sharing momentum and decay but with separate peak rates."""

    def __init__(self, groups, momentum: float = 0.9, weight_decay: float = 5e-4):
        # groups: list of (lr_max, [(name, Tensor), ...])
        self.groups = [(lr_max, list(named)) for lr_max, named in groups]
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buffers = {name: np.zeros_like(p.data) for _, named in self.groups for name, p in named}

    def step(self, lrs) -> None:
        for lr, (_, named) in zip(lrs, self.groups):
            params = [p.data for _, p in named]
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for _, p in named]
            bufs = [self.buffers[n] for n, _ in named]
            sgd_step(params, grads, bufs, lr, self.momentum, self.weight_decay)

    def rates(self, step: int, total_steps: int, warmup_fraction: float) -> list[float]:
        return [lr_schedule(step, total_steps, lr_max, warmup_fraction) for lr_max, _ in self.groups]

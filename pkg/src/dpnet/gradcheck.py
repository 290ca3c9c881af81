"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    worst: tuple  # (input index, flat coordinate, analytic, numeric)
    kinks: int = 0  # coordinates re-measured with a smaller step


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


KINK_ASYMMETRY = 0.1
KINK_RETRIES = 2


def _numeric(fn, flat, c, eps: float, f0: float) -> tuple[float, bool]:
    """Central difference at coordinate ``c`` and whether the step straddles a kink."""
    orig = flat[c]
    flat[c] = orig + eps
    f_plus = fn().item()
    flat[c] = orig - eps
    f_minus = fn().item()
    flat[c] = orig
    right, left = (f_plus - f0) / eps, (f0 - f_minus) / eps
    kink = abs(right - left) > KINK_ASYMMETRY * max(abs(right), abs(left), 1e-8)
    return (f_plus - f_minus) / (2 * eps), kink


def grad_check_detailed(fn: Callable[[], Tensor], inputs: Sequence[Tensor] | Tensor,
                        eps: float = 1e-5, max_coords: Optional[int] = None,
                        rng: Optional[np.random.Generator] = None) -> GradCheckResult:
    """Compare backward() against ``(f(x+eps) - f(x-eps)) / (2 eps)``.

    ``fn`` rebuilds the scalar loss from the current contents of ``inputs``.
    With ``max_coords`` set, at most that many coordinates per input are
    sampled (without replacement) using ``rng``.

    When the one-sided slopes disagree by more than 10% the step crossed a
    ReLU kink; the coordinate is re-measured with a 10x smaller step, at
    most twice.  Smooth coordinates never trigger this.
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    loss = fn()
    backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    worst = (-1, -1, 0.0, 0.0)
    max_err = 0.0
    checked = 0
    rng = rng if rng is not None else np.random.default_rng(0)
    kinks = 0
    with no_grad():
        f0 = fn().item()
        for idx, t in enumerate(inputs):
            flat = t.data.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
            for c in coords:
                step = eps
                num, kink = _numeric(fn, flat, c, step, f0)
                for _ in range(KINK_RETRIES):
                    if not kink:
                        break
                    kinks += 1
                    step /= 10
                    num, kink = _numeric(fn, flat, c, step, f0)
                ana = analytic[idx].reshape(-1)[c]
                err = relative_error(ana, num)
                checked += 1
                if err > max_err or worst[0] < 0:
                    max_err = max(err, max_err)
                    worst = (idx, int(c), float(ana), float(num))
    return GradCheckResult(max_err, checked, worst, kinks)


def grad_check(fn: Callable[[], Tensor], inputs: Sequence[Tensor] | Tensor, eps: float = 1e-5,
               max_coords: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> float:
    """Maximum relative error between analytic and central-difference gradients."""
    return grad_check_detailed(fn, inputs, eps, max_coords, rng).max_rel_error

"""Differentiable operations.

Each function takes :class:`~dpnet.tensor.Tensor` operands (plain numbers and
arrays are promoted to constants) and records its backward rule on the result.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from . import kernels
from .tensor import ConfigError, ShapeError, Tensor, as_tensor, make_result


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# --- elementwise arithmetic -------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_result(a.data + b.data, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return make_result(a.data - b.data, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        return (_unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
                _unbroadcast(g * ad, bd.shape) if b.requires_grad else None)

    return make_result(ad * bd, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd

    def backward(g):
        return (_unbroadcast(g / bd, ad.shape) if a.requires_grad else None,
                _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None)

    return make_result(out, (a, b), backward, "div")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # gradient at exactly 0 is 0
    return make_result(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ConfigError(f"unknown activation {kind!r}")


def bce_with_logits(logits: Tensor, target) -> Tensor:
    """Per-element binary cross entropy, ``max(x,0) - x*t + log(1+exp(-|x|))``.

    ``target`` is treated as a constant.
    """
    x = logits.data
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    out = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    return make_result(out, (logits,), lambda g: (g * (_sigmoid(x) - t),), "bce_with_logits")


# --- reductions and shape ---------------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = x.shape
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make_result(out, (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return make_result(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def concat(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return make_result(np.concatenate([x.data for x in xs], axis=axis), xs, backward, "concat")


def channels(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice ``x[:, start:stop]``."""
    shape = x.shape

    def backward(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return make_result(x.data[:, start:stop], (x,), backward, "channels")


# --- layers -----------------------------------------------------------------

def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per channel, ``(n, c, h, w) -> (n, c, 1, 1)``."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool expects a rank-4 tensor, got shape {x.shape}")
    n, c, h, w = x.shape
    scale = 1.0 / (h * w)
    return make_result(x.data.mean(axis=(2, 3), keepdims=True), (x,),
                       lambda g: (np.broadcast_to(g * scale, (n, c, h, w)).copy(),), "global_avg_pool")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight.T + bias`` on ``(n, in)`` rows; ``weight`` is ``(out, in)``."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: bias {bias.shape} incompatible with weight {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        gx = g @ wd if x.requires_grad else None
        gw = g.T @ xd if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=0)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward, "linear")


def segment_softmax(x: Tensor, segment: int, mode: str = "segment") -> Tensor:
    """Softmax over consecutive length-``segment`` runs of each row of ``(n, L)``.

    ``mode="whole"`` normalizes each full row instead.
    """
    if x.ndim != 2:
        raise ShapeError(f"segment_softmax expects (n, L), got {x.shape}")
    n, length = x.shape
    if mode == "whole":
        segment = length
    elif mode != "segment":
        raise ConfigError(f"unknown softmax mode {mode!r}")
    if segment < 1 or length % segment:
        raise ShapeError(f"row length {length} is not divisible by segment length {segment}")
    z = x.data.reshape(n, length // segment, segment)
    e = np.exp(z - z.max(axis=2, keepdims=True))
    s = e / e.sum(axis=2, keepdims=True)

    def backward(g):
        g = g.reshape(s.shape)
        return ((s * (g - (g * s).sum(axis=2, keepdims=True))).reshape(n, length),)

    return make_result(s.reshape(n, length), (x,), backward, "segment_softmax")


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """Zero-padded grouped 2-D cross-correlation.

    ``weight`` has shape ``(c_out, c_in // groups, k, k)``; input and output
    channels are split into ``groups`` contiguous blocks.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d: input {x.shape} and weight {weight.shape} must both be rank 4")
    n, c_in, h, w = x.shape
    c_out, cg, k, k2 = weight.shape
    if groups < 1 or c_in % groups or c_out % groups:
        raise ConfigError(f"conv2d: groups={groups} must divide c_in={c_in} and c_out={c_out}")
    if cg * groups != c_in or k != k2:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with weight {weight.shape} (groups={groups})")
    if stride < 1 or padding < 0:
        raise ConfigError(f"conv2d: invalid stride={stride} / padding={padding}")
    oh = (h + 2 * padding - k) // stride + 1
    ow = (w + 2 * padding - k) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: kernel {k} does not fit input {x.shape} with padding {padding}")
    cog = c_out // groups
    cols = kernels.im2col(np.ascontiguousarray(x.data), k, stride, padding)
    cols = cols.reshape(n, groups, cg * k * k, oh * ow)
    wmat = weight.data.reshape(groups, cog, cg * k * k)
    out = np.matmul(wmat, cols).reshape(n, c_out, oh, ow)
    if bias is not None:
        out += bias.data.reshape(1, c_out, 1, 1)

    def backward(g):
        g = g.reshape(n, groups, cog, oh * ow)
        gx = gw = None
        if x.requires_grad:
            dcols = np.matmul(wmat.transpose(0, 2, 1), g).reshape(n, c_in, k, k, oh, ow)
            gx = kernels.col2im(dcols, h, w, stride, padding)
        if weight.requires_grad:
            gw = np.matmul(g, cols.transpose(0, 1, 3, 2)).sum(axis=0).reshape(weight.shape)
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 3)).reshape(c_out)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward, "conv2d")


@lru_cache(maxsize=256)
def bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-interpolation matrix for half-pixel-centre (align_corners=False) resampling."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for d in range(n_out):
        src = max((d + 0.5) * scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        lam = src - i0
        m[d, i0] += 1.0 - lam
        m[d, i1] += lam
    m.setflags(write=False)
    return m


def resize_bilinear(x: Tensor, out_h: int, out_w: int) -> Tensor:
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"resize target must be positive, got {out_h}x{out_w}")
    n, c, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return x
    rh = bilinear_matrix(h, out_h)
    rw = bilinear_matrix(w, out_w)
    out = np.matmul(rh, x.data @ rw.T)

    def backward(g):
        return (np.matmul(rh.T, g) @ rw,)

    return make_result(out, (x,), backward, "resize_bilinear")

"""Pure-numpy im2col / col2im, used when the compiled extension is unavailable.

Accumulation order in :func:`col2im` matches the compiled kernel (kernel row,
then kernel column), so both backends produce bit-identical results.
"""

import numpy as np


def im2col(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    out = np.empty((n, c, k, k, oh, ow), dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki, kj] = xp[:, :, ki:ki + stride * (oh - 1) + 1:stride,
                                   kj:kj + stride * (ow - 1) + 1:stride]
    return out


def col2im(cols: np.ndarray, h: int, w: int, stride: int, pad: int) -> np.ndarray:
    n, c, k, _, oh, ow = cols.shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            xp[:, :, ki:ki + stride * (oh - 1) + 1:stride,
               kj:kj + stride * (ow - 1) + 1:stride] += cols[:, :, ki, kj]
    return xp[:, :, pad:pad + h, pad:pad + w] if pad else xp

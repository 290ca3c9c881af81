"""Slow, obviously-correct reference implementations used only by tests."""

import numpy as np


def conv2d_loops(x, w, b=None, stride=1, padding=0, groups=1):
    n, c_in, h, wd = x.shape
    c_out, cg, k, _ = w.shape
    cog = c_out // groups
    xp = np.zeros((n, c_in, h + 2 * padding, wd + 2 * padding))
    xp[:, :, padding:padding + h, padding:padding + wd] = x
    oh = (h + 2 * padding - k) // stride + 1
    ow = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, c_out, oh, ow))
    for b_ in range(n):
        for o in range(c_out):
            grp = o // cog
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for c in range(cg):
                        for ki in range(k):
                            for kj in range(k):
                                acc += xp[b_, grp * cg + c, i * stride + ki, j * stride + kj] * w[o, c, ki, kj]
                    out[b_, o, i, j] = acc + (b[o] if b is not None else 0.0)
    return out


def bilinear_loops(x, out_h, out_w):
    """Half-pixel-centre bilinear resize, source coordinates clamped at 0 and at the last pixel."""
    h, w = x.shape[-2:]
    out = np.zeros(x.shape[:-2] + (out_h, out_w))
    for i in range(out_h):
        sy = max((i + 0.5) * h / out_h - 0.5, 0.0)
        y0 = min(int(sy), h - 1)
        y1 = min(y0 + 1, h - 1)
        ly = sy - y0
        for j in range(out_w):
            sx = max((j + 0.5) * w / out_w - 0.5, 0.0)
            x0 = min(int(sx), w - 1)
            x1 = min(x0 + 1, w - 1)
            lx = sx - x0
            out[..., i, j] = ((1 - ly) * ((1 - lx) * x[..., y0, x0] + lx * x[..., y0, x1])
                              + ly * ((1 - lx) * x[..., y1, x0] + lx * x[..., y1, x1]))
    return out


def box_mean_loops(gt, window=15):
    h, w = gt.shape
    r = window // 2
    out = np.zeros_like(gt, dtype=float)
    for i in range(h):
        for j in range(w):
            patch = gt[max(0, i - r):i + r + 1, max(0, j - r):j + r + 1]
            out[i, j] = patch.mean()
    return out


def weights_loops(gt, window=15, gain=5.0):
    return 1.0 + gain * np.abs(box_mean_loops(gt, window) - gt)


def wbce_loops(logits, gt):
    """Per-image weighted BCE averaged over the batch; inputs (n, 1, h, w)."""
    total = 0.0
    for z, y in zip(logits[:, 0], gt[:, 0]):
        w = weights_loops(y)
        num = den = 0.0
        for i in range(z.shape[0]):
            for j in range(z.shape[1]):
                p = 1.0 / (1.0 + np.exp(-z[i, j]))
                bce = -(y[i, j] * np.log(p) + (1 - y[i, j]) * np.log(1 - p))
                num += w[i, j] * bce
                den += w[i, j]
        total += num / den
    return total / len(logits)


def wiou_loops(logits, gt):
    total = 0.0
    for z, y in zip(logits[:, 0], gt[:, 0]):
        w = weights_loops(y)
        inter = union = 0.0
        for i in range(z.shape[0]):
            for j in range(z.shape[1]):
                p = 1.0 / (1.0 + np.exp(-z[i, j]))
                inter += w[i, j] * p * y[i, j]
                union += w[i, j] * (p + y[i, j] - p * y[i, j])
        total += 0.0 if union == 0 else 1.0 - inter / union
    return total / len(logits)


def precision_recall_loops(pred, gt):
    pred, gt = pred.ravel(), gt.ravel() > 0.5
    precision, recall = np.zeros(256), np.zeros(256)
    for k in range(256):
        t = k / 255.0
        pos = pred >= t
        tp = np.sum(pos & gt)
        precision[k] = tp / pos.sum() if pos.sum() else 1.0
        recall[k] = tp / gt.sum() if gt.sum() else 0.0
    return precision, recall

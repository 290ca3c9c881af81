# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col / col2im kernels for zero-padded strided convolution."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _valid_range(Py_ssize_t tap, Py_ssize_t n_out, Py_ssize_t size, int stride, int pad,
                              Py_ssize_t *lo, Py_ssize_t *hi) noexcept nogil:
    # output positions i with 0 <= i * stride + tap - pad < size
    cdef Py_ssize_t first = pad - tap
    lo[0] = 0 if first <= 0 else (first + stride - 1) // stride
    cdef Py_ssize_t last = size - 1 + pad - tap
    hi[0] = 0 if last < 0 else min(n_out, last // stride + 1)
    if hi[0] < lo[0]:
        hi[0] = lo[0]


def im2col(const double[:, :, :, ::1] x, int k, int stride, int pad):
    """Gather patches into an ``(n, c, k, k, oh, ow)`` array; out-of-range taps read zero."""
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - k) // stride + 1
    out_arr = np.empty((n, c, k, k, oh, ow), dtype=np.float64)
    cdef double[:, :, :, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ch, ki, kj, i, j, i_lo, i_hi, j_lo, j_hi, off
    cdef double *dst
    cdef const double *src
    with nogil:
        for ki in range(k):
            _valid_range(ki, oh, h, stride, pad, &i_lo, &i_hi)
            for kj in range(k):
                _valid_range(kj, ow, w, stride, pad, &j_lo, &j_hi)
                off = kj - pad
                for b in range(n):
                    for ch in range(c):
                        for i in range(oh):
                            dst = &out[b, ch, ki, kj, i, 0]
                            if i < i_lo or i >= i_hi:
                                for j in range(ow):
                                    dst[j] = 0.0
                                continue
                            src = &x[b, ch, i * stride + ki - pad, 0]
                            for j in range(j_lo):
                                dst[j] = 0.0
                            for j in range(j_lo, j_hi):
                                dst[j] = src[j * stride + off]
                            for j in range(j_hi, ow):
                                dst[j] = 0.0
    return out_arr


def col2im(const double[:, :, :, :, :, ::1] cols, Py_ssize_t h, Py_ssize_t w, int stride, int pad):
    """Scatter-add an ``(n, c, k, k, oh, ow)`` patch gradient back onto an ``(n, c, h, w)`` image.

    Taps are accumulated kernel row first, then kernel column, the same order
    as the numpy fallback, so results are bit-identical.
    """
    cdef Py_ssize_t n = cols.shape[0], c = cols.shape[1], k = cols.shape[2]
    cdef Py_ssize_t oh = cols.shape[4], ow = cols.shape[5]
    out_arr = np.zeros((n, c, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, ch, ki, kj, i, j, i_lo, i_hi, j_lo, j_hi, off
    cdef double *dst
    cdef const double *src
    with nogil:
        for b in range(n):
            for ch in range(c):
                for ki in range(k):
                    _valid_range(ki, oh, h, stride, pad, &i_lo, &i_hi)
                    for kj in range(k):
                        _valid_range(kj, ow, w, stride, pad, &j_lo, &j_hi)
                        off = kj - pad
                        for i in range(i_lo, i_hi):
                            dst = &out[b, ch, i * stride + ki - pad, 0]
                            src = &cols[b, ch, ki, kj, i, 0]
                            for j in range(j_lo, j_hi):
                                dst[j * stride + off] += src[j]
    return out_arr

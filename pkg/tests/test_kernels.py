import numpy as np
import pytest

from dpnet import kernels
from dpnet.kernels import reference

fast = pytest.importorskip("dpnet.kernels._fast")


@pytest.mark.parametrize("k,stride,pad", [(1, 1, 0), (3, 1, 1), (3, 2, 1), (5, 2, 2), (7, 3, 0), (9, 1, 4)])
def test_backends_bit_identical(k, stride, pad):
    rng = np.random.default_rng(k * 10 + stride)
    x = rng.standard_normal((2, 3, 11, 9))
    a, b = reference.im2col(x, k, stride, pad), fast.im2col(x, k, stride, pad)
    assert a.shape == b.shape
    assert np.array_equal(a, b)
    cols = rng.standard_normal(a.shape)
    assert np.array_equal(reference.col2im(cols, 11, 9, stride, pad), fast.col2im(cols, 11, 9, stride, pad))


def test_col2im_is_adjoint_of_im2col():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 2, 6, 7))
    cols = kernels.im2col(x, 3, 2, 1)
    y = rng.standard_normal(cols.shape)
    lhs = np.sum(cols * y)
    rhs = np.sum(x * kernels.col2im(y, 6, 7, 2, 1))
    assert abs(lhs - rhs) < 1e-10


def test_backend_selected():
    assert kernels.BACKEND in ("python", "cython")

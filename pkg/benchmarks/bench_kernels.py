"""Compare the compiled and numpy im2col/col2im kernels, and a full conv forward/backward.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from dpnet.kernels import reference

try:
    from dpnet.kernels import _fast
except ImportError:
    _fast = None

CASES = [  # (n, c, h, w, k, stride, pad)
    (8, 16, 32, 32, 3, 2, 1),
    (8, 16, 16, 16, 9, 1, 4),
    (8, 32, 8, 8, 7, 1, 3),
    (8, 64, 4, 4, 5, 1, 2),
]


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if _fast is None:
        print("compiled backend not built; only the numpy backend is available")
    print("case,op,python_ms,cython_ms,speedup")
    rng = np.random.default_rng(0)
    for n, c, h, w, k, s, p in CASES:
        x = rng.standard_normal((n, c, h, w))
        cols = reference.im2col(x, k, s, p)
        g = rng.standard_normal(cols.shape)
        name = f"{n}x{c}x{h}x{w}/k{k}s{s}p{p}"
        for op, py, cy in (("im2col", lambda: reference.im2col(x, k, s, p),
                            _fast and (lambda: _fast.im2col(x, k, s, p))),
                           ("col2im", lambda: reference.col2im(g, h, w, s, p),
                            _fast and (lambda: _fast.col2im(g, h, w, s, p)))):
            t_py = bench(py, args.repeat)
            if cy:
                t_cy = bench(cy, args.repeat)
                print(f"{name},{op},{t_py:.3f},{t_cy:.3f},{t_py / t_cy:.2f}")
            else:
                print(f"{name},{op},{t_py:.3f},,")


if __name__ == "__main__":
    main()

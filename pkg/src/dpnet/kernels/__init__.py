"""Convolution gather/scatter kernels.

The compiled Cython backend is used when it has been built; otherwise the
numpy reference implementation is selected.  Set ``DPNET_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import reference

BACKEND = "python"
im2col = reference.im2col
col2im = reference.col2im

if not os.environ.get("DPNET_PURE_PYTHON"):
    try:
        from . import _fast
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        im2col = _fast.im2col
        col2im = _fast.col2im

__all__ = ["BACKEND", "im2col", "col2im", "reference"]

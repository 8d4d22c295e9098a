"""Selects the compiled quadrature kernel, falling back to numpy.

Set ``TWISTYOUNG_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

MODES = {"untwisted": 0, "twisted": 1, "difference": 2, "sigma": 3, "sigma2": 4}

BACKEND = "python"
twisted_sum = _kernels_py.twisted_sum

if not os.environ.get("TWISTYOUNG_PURE_PYTHON"):
    try:
        from ._kernels import twisted_sum  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

python_twisted_sum = _kernels_py.twisted_sum

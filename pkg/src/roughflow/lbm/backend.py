"""Selects the hot-kernel implementation.

Set ROUGHFLOW_BACKEND=numpy to force the pure-numpy path (e.g. when numba
is unavailable or for debugging); any other value, or unset, prefers numba.
"""

from __future__ import annotations

import os

from . import kernels_numpy


def _load():
    choice = os.environ.get("ROUGHFLOW_BACKEND", "numba").lower()
    if choice == "numpy":
        return kernels_numpy, "numpy"
    try:
        from . import kernels_numba
        return kernels_numba, "numba"
    except ImportError:
        return kernels_numpy, "numpy"


_KERNELS, BACKEND_NAME = _load()

step = _KERNELS.step
moments = kernels_numpy.moments

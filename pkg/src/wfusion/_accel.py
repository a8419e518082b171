"""Optional numba acceleration.

Kernels are written once as plain Python over numpy arrays and compiled with
``numba.njit`` when numba is importable. Setting ``WFUSION_DISABLE_JIT=1``
forces the pure-numpy implementations, which is what the benchmark compares
against.
"""

import os

_FLAG = "WFUSION_DISABLE_JIT"

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None


def jit_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


HAVE_NUMBA = numba is not None
USE_JIT = HAVE_NUMBA and jit_requested()


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged without numba."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)

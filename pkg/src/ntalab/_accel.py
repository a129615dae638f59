"""Optional numba acceleration.

Set ``NTALAB_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  The flag is
read once at import time.
"""
import os

import numpy as np

_disabled = os.environ.get("NTALAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip the TBB probe, which warns on older TBB installs
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via subprocess test
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise the identity decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if HAVE_NUMBA:
    prange = numba.prange
else:
    prange = range


def set_threads(n):
    """Set the worker count for parallel kernels (``None`` restores the default); returns the count used."""
    if not HAVE_NUMBA:
        return 1
    top = numba.config.NUMBA_NUM_THREADS
    n = top if n is None else max(1, min(int(n), top))
    numba.set_num_threads(n)
    return n


def backend():
    return "numba" if HAVE_NUMBA else "numpy"


__all__ = ["HAVE_NUMBA", "njit", "prange", "set_threads", "backend", "np"]

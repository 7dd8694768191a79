"""Numba switch.

Every hot kernel in :mod:`ocrhmm.kernels` exists twice: a loop version
compiled with ``numba.njit`` and a vectorised numpy version.  Which one the
rest of the package calls is decided once, at import time, from the
``OCRHMM_DISABLE_NUMBA`` environment variable (or from numba being absent).
Both versions stay importable so the test-suite can compare them.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_FLAG = os.environ.get("OCRHMM_DISABLE_NUMBA", "").strip().lower()

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in {"1", "true", "yes", "on"}


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or the identity without numba."""
    if not NUMBA_AVAILABLE:
        if args and callable(args[0]):
            return args[0]
        return lambda func: func
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

"""Numba switch.

Set ``LOSSFORGE_NO_JIT=1`` in the environment to force the pure-numpy
kernels (useful for debugging and for checking the two paths agree).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency but stay importable
    numba = None

_disabled = os.environ.get("LOSSFORGE_NO_JIT", "").strip().lower() not in ("", "0", "false", "no")

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _disabled


def njit(func=None, **options):
    """``numba.njit`` with caching, or the identity when numba is unavailable."""
    options.setdefault("cache", True)
    if numba is None:
        if func is None:
            return lambda f: f
        return func
    if func is None:
        return lambda f: numba.njit(f, **options)
    return numba.njit(func, **options)


def backend():
    return "numba" if USE_NUMBA else "numpy"

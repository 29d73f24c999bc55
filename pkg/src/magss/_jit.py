"""Optional numba acceleration.

Hot numeric kernels are written once in a numba-compatible numpy subset and
decorated with :func:`njit`. Setting ``MAGSS_DISABLE_NUMBA=1`` in the
environment (before import) runs the very same functions as plain Python on
numpy arrays, which is what the benchmark compares against.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("MAGSS_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in ("1", "true", "yes", "on")
USE_NUMBA = numba is not None and not DISABLED_BY_ENV


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when acceleration is on, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(**kwargs)(f)
        return f

    if func is not None:
        return wrap(func)
    return wrap


def backend():
    return "numba" if USE_NUMBA else "numpy"

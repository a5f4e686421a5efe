"""Numba switch for the hot kernels.

Set ``SATRDO_NO_NUMBA=1`` to run every kernel through its pure-numpy (or
plain Python) path. The flag is read once, at import time.
"""
import os

_DISABLED = os.environ.get("SATRDO_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled by SATRDO_NO_NUMBA")
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    _njit = None
    NUMBA_ENABLED = False


def jit(func=None, **options):
    """``numba.njit`` when enabled, identity otherwise.

    The undecorated function is kept on ``.py_func`` in both cases so tests
    and benchmarks can reach the interpreted version.
    """
    options.setdefault("cache", True)
    options.setdefault("nogil", True)

    def wrap(f):
        if NUMBA_ENABLED:
            return _njit(**options)(f)
        f.py_func = f
        return f

    if func is not None:
        return wrap(func)
    return wrap

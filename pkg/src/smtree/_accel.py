"""Numba switch.

Kernels are compiled with numba unless ``SMTREE_DISABLE_NUMBA`` is set to
a truthy value or numba is not importable, in which case the pure-numpy
implementations in :mod:`smtree.kernels` are used. The flag is read once
at import time.
"""

import os

_FLAG = os.environ.get("SMTREE_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def numba_enabled() -> bool:
    return HAVE_NUMBA

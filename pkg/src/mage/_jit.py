"""Optional numba acceleration.

Hot kernels (CFR sweeps, MCTS playouts, alpha-beta) are written once as plain
numpy-over-scalars functions and decorated with :func:`njit`.  Setting
``MAGE_DISABLE_NUMBA=1`` (or running without numba installed) turns the
decorator into a no-op so the same code runs as ordinary Python.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("MAGE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba

    NUMBA_OK = True
except ImportError:
    numba = None
    NUMBA_OK = False


def njit(*args, **kwargs):
    if NUMBA_OK:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


__all__ = ["njit", "NUMBA_OK", "DISABLED"]

"""Numba availability and the switch between fused kernels and the numpy path.

Set ``ADAPTVI_DISABLE_NUMBA=1`` to force the pure-numpy solver loops even when
numba is importable.
"""

import os

_DISABLED = os.environ.get("ADAPTVI_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled by ADAPTVI_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def kernels_enabled(use_kernels=None):
    """Resolve a per-call override against the process-wide default."""
    if use_kernels is None:
        return HAS_NUMBA
    return bool(use_kernels) and HAS_NUMBA

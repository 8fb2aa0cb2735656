"""Numba switch shared by the hot kernels.

Set ``RISHIELD_DISABLE_NUMBA=1`` to force the pure-numpy paths (useful when
debugging or on platforms without a working LLVM).  Both paths stay importable
so tests and the benchmark can compare them directly.
"""

import os

_flag = os.environ.get("RISHIELD_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip the TBB probe; old TBB builds only produce a warning
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator

    prange = range

USE_NUMBA = NUMBA_AVAILABLE and _flag not in ("1", "true", "yes", "on")


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

"""Numba switch.

Kernels are written once in a numba-compatible subset of Python. They are
compiled with ``numba.njit`` unless numba is missing or the environment
variable ``IMPGEOD_DISABLE_NUMBA`` is set to a truthy value, in which case
the same functions run as plain numpy/Python code.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("IMPGEOD_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_ENABLED = numba is not None and not DISABLED_BY_ENV


def jit(func):
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"

"""Kernel backend selection.

Numba kernels are used when numba imports cleanly, unless the environment
variable ``ATTNFORECAST_DISABLE_NUMBA`` is set to a non-empty value other
than ``0``. The numpy fallback is always importable for comparison.
"""

from __future__ import annotations

import os

from . import _kernels_numpy as numpy_kernels

_flag = os.environ.get("ATTNFORECAST_DISABLE_NUMBA", "")
_disabled = _flag not in ("", "0")

numba_kernels = None
if not _disabled:
    try:
        from . import _kernels_numba as numba_kernels
    except ImportError:  # pragma: no cover - numba missing
        numba_kernels = None

USE_NUMBA = numba_kernels is not None
kernels = numba_kernels if USE_NUMBA else numpy_kernels
BACKEND = "numba" if USE_NUMBA else "numpy"

__all__ = ["BACKEND", "USE_NUMBA", "kernels", "numba_kernels", "numpy_kernels"]

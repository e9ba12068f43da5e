"""Backend selection for the time-stepping kernel.

The compiled extension is used when it imports; setting the environment
variable ``SPINPAIR_PURE_PYTHON=1`` forces the NumPy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
propagate = _kernels_py.propagate

if os.environ.get("SPINPAIR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        propagate = _kernels.propagate
        BACKEND = "cython"

__all__ = ["BACKEND", "propagate"]

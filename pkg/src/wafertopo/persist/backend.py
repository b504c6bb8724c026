"""Kernel backend selection: compiled extension if available, else Python.

Set WAFERTOPO_PURE_PYTHON=1 to force the fallback (used by the benchmark
and the backend-equivalence tests).
"""
from __future__ import annotations

import os

if os.environ.get("WAFERTOPO_PURE_PYTHON") == "1":
    from . import _reduction_py as kernel
else:
    try:
        from . import _reduction as kernel  # type: ignore[no-redef]
    except ImportError:
        from . import _reduction_py as kernel  # type: ignore[no-redef]

BACKEND = kernel.BACKEND_NAME

__all__ = ["kernel", "BACKEND"]

"""Kernel backend selection: compiled extension if available, else pure Python.

Set ``ANNEALTRACK_PURE_PYTHON=1`` to force the fallback (used by the
benchmark script to compare both implementations).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("ANNEALTRACK_PURE_PYTHON") == "1":
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def kernel_backend() -> str:
    """Name of the active kernel implementation: 'compiled' or 'python'."""
    return kernels.BACKEND_NAME

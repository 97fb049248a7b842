"""Backend selection for the edge-detection hot kernels.

The compiled Cython extension is preferred when present; the NumPy/SciPy
implementation is the drop-in fallback. Set ``TIRFILL_KERNELS=numpy`` to force
the fallback (used by the benchmark and for debugging).
"""

from __future__ import annotations

import os

from . import _canny_np

try:
    from . import _canny_cy
except ImportError:  # extension not built
    _canny_cy = None


def get_impl(name: str | None = None):
    """Return the kernel module for ``name`` ("compiled", "numpy" or None=auto)."""
    if name is None:
        name = os.environ.get("TIRFILL_KERNELS", "auto")
    if name in ("auto", ""):
        return _canny_cy if _canny_cy is not None else _canny_np
    if name == "compiled":
        if _canny_cy is None:
            raise ImportError("compiled kernels requested but the extension is not built")
        return _canny_cy
    if name == "numpy":
        return _canny_np
    raise ValueError(f"unknown kernel backend {name!r}")


ACTIVE = get_impl()
BACKEND_NAME = ACTIVE.BACKEND_NAME
HAVE_COMPILED = _canny_cy is not None

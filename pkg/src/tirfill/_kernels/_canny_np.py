"""NumPy/SciPy fallback for the hot edge-detection kernels.

Semantics must match ``_canny_cy`` exactly; the test suite asserts bit
equality between the two backends.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

BACKEND_NAME = "numpy"


def nms(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Suppress gradient magnitudes that are not local maxima along the
    gradient direction, quantized to 4 orientations.

    Tie rule: a pixel survives iff it is strictly greater than the neighbor
    against the gradient and >= the neighbor along it, so a two-pixel plateau
    thins to a single line. The one-pixel border is always suppressed.
    """
    h, w = mag.shape
    out = np.zeros_like(mag)
    if h < 3 or w < 3:
        return out

    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0

    # neighbor offsets (dy, dx) along the gradient direction per orientation bin
    bins = {
        0: (0, 1),  # [0, 22.5) u [157.5, 180): horizontal gradient
        1: (1, 1),  # [22.5, 67.5)
        2: (1, 0),  # [67.5, 112.5): vertical gradient
        3: (1, -1),  # [112.5, 157.5)
    }
    bin_idx = np.full((h, w), 0, dtype=np.int8)
    bin_idx[(angle >= 22.5) & (angle < 67.5)] = 1
    bin_idx[(angle >= 67.5) & (angle < 112.5)] = 2
    bin_idx[(angle >= 112.5) & (angle < 157.5)] = 3

    interior = np.zeros((h, w), dtype=bool)
    interior[1:-1, 1:-1] = True
    for b, (dy, dx) in bins.items():
        sel = interior & (bin_idx == b) & (mag > 0)
        ys, xs = np.nonzero(sel)
        ahead = mag[ys + dy, xs + dx]
        behind = mag[ys - dy, xs - dx]
        keep = (mag[ys, xs] > behind) & (mag[ys, xs] >= ahead)
        out[ys[keep], xs[keep]] = mag[ys[keep], xs[keep]]
    return out


def hysteresis(smag: np.ndarray, low: float, high: float) -> np.ndarray:
    """Double-threshold linking: keep weak pixels (>= low) 8-connected to a
    strong pixel (>= high). Returns a uint8 {0,1} edge map."""
    weak = smag >= low
    strong = smag >= high
    if not strong.any():
        return np.zeros(smag.shape, dtype=np.uint8)
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=np.uint8))
    keep = np.unique(labels[strong])
    keep = keep[keep > 0]
    return np.isin(labels, keep).astype(np.uint8)

"""Canny edge extraction, edge binarization and the recomposition operator.

Edge maps are binary ``float32`` arrays shaped like their source image. The
Canny pipeline is fixed: Gaussian smoothing (sigma 1.4, 5x5 kernel), Sobel
gradients, 4-direction non-maximum suppression, double-threshold hysteresis
with 8-connected linking. Thresholds are given on the 8-bit scale, so the
[0, 1] input is scaled by 255 before gradient computation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import _kernels
from .data_pipeline import validate_image, validate_mask
from .errors import ValidationError

DEFAULT_LOW_THRESHOLD = 80.0
DEFAULT_HIGH_THRESHOLD = 160.0
BINARIZE_THRESHOLD = 0.5

GAUSSIAN_SIGMA = 1.4
GAUSSIAN_KSIZE = 5

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()


def _gaussian_kernel(ksize: int = GAUSSIAN_KSIZE, sigma: float = GAUSSIAN_SIGMA) -> np.ndarray:
    half = ksize // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(ax**2) / (2.0 * sigma**2))
    kernel = np.outer(g1, g1)
    return kernel / kernel.sum()


_GAUSS = _gaussian_kernel()


def canny(
    image: np.ndarray,
    low_threshold: float = DEFAULT_LOW_THRESHOLD,
    high_threshold: float = DEFAULT_HIGH_THRESHOLD,
    backend: str | None = None,
) -> np.ndarray:
    """Full Canny edge map of a single-channel [0, 1] image.

    ``backend`` picks the NMS/hysteresis kernels ("compiled", "numpy",
    None = auto).
    """
    validate_image(image)
    if not (0 <= low_threshold < high_threshold <= 255):
        raise ValidationError(
            f"thresholds must satisfy 0 <= low < high <= 255, got ({low_threshold}, {high_threshold})"
        )
    impl = _kernels.get_impl(backend)
    scaled = image.astype(np.float64) * 255.0
    smoothed = ndimage.correlate(scaled, _GAUSS, mode="reflect")
    gx = ndimage.correlate(smoothed, SOBEL_X, mode="reflect")
    gy = ndimage.correlate(smoothed, SOBEL_Y, mode="reflect")
    mag = np.hypot(gx, gy)
    suppressed = impl.nms(
        np.ascontiguousarray(mag), np.ascontiguousarray(gx), np.ascontiguousarray(gy)
    )
    edges = impl.hysteresis(np.ascontiguousarray(suppressed), float(low_threshold), float(high_threshold))
    return edges.astype(np.float32)


def binarize(raw: np.ndarray, t0: float = BINARIZE_THRESHOLD) -> np.ndarray:
    """Unit-step thresholding of an edge probability grid: value >= t0 -> 1."""
    arr = np.asarray(raw)
    if arr.size and (float(arr.min()) < 0.0 or float(arr.max()) > 1.0):
        raise ValidationError("probability grid values outside [0, 1]")
    return (arr >= t0).astype(np.float32)


def recompose(known: np.ndarray, predicted: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Splice predicted content into the hole: ``known + predicted * (1 - mask)``.

    ``known`` must be zero at hole positions (guaranteed upstream by
    ``apply_mask`` or by masking the edge map), so the output equals ``known``
    at valid pixels and ``predicted`` inside the hole.
    """
    if not (known.shape == predicted.shape == mask.shape):
        raise ValidationError(
            f"shape mismatch: known {known.shape}, predicted {predicted.shape}, mask {mask.shape}"
        )
    validate_mask(mask)
    return (known + predicted * (1.0 - mask)).astype(known.dtype, copy=False)


def write_edge_png(edge: np.ndarray, path: str | Path) -> None:
    """Dump a binary edge map as an 8-bit PNG (0/255), e.g. for inspecting the
    reconstructed edges of an object-removal request."""
    arr = (np.asarray(edge) >= 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)

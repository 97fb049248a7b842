"""Loading, preprocessing and mask synthesis for thermal infrared images.

Images are single-channel ``float32`` arrays of shape ``(H, W)`` with values
in ``[0, 1]``. Masks share the shape and hold exactly ``0.0`` (hole) or
``1.0`` (valid pixel). All randomness goes through an explicitly passed
``numpy.random.Generator`` so preprocessing is reproducible.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .errors import MaskGenerationError, ValidationError

TRAIN_SIZE = 256
# Test-time geometry: resize to height 300 / width 375, then center-crop.
TEST_RESIZE_H = 300
TEST_RESIZE_W = 375
TEST_CROP = 256
MIN_TRAIN_INPUT = 64


def validate_image(image: np.ndarray, name: str = "image") -> None:
    if not isinstance(image, np.ndarray) or image.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array, got {getattr(image, 'shape', None)}")
    if image.size == 0:
        raise ValidationError(f"{name} has zero pixels")
    if not np.all(np.isfinite(image)):
        raise ValidationError(f"{name} contains non-finite values")
    lo, hi = float(image.min()), float(image.max())
    if lo < 0.0 or hi > 1.0:
        raise ValidationError(f"{name} values outside [0, 1]: min={lo}, max={hi}")


def validate_mask(mask: np.ndarray, name: str = "mask") -> None:
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array, got {getattr(mask, 'shape', None)}")
    if mask.size == 0:
        raise ValidationError(f"{name} has zero pixels")
    bad = (mask != 0.0) & (mask != 1.0)
    if bad.any():
        raise ValidationError(f"{name} must be binary (0 = hole, 1 = valid)")


@dataclasses.dataclass(frozen=True)
class MaskBucket:
    """Half-open hole-ratio range ``[lower, upper)`` used to stratify evaluation."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lower < self.upper <= 1.0):
            raise ValidationError(f"invalid bucket bounds [{self.lower}, {self.upper})")

    @property
    def label(self) -> str:
        return f"{round(self.lower * 100)}-{round(self.upper * 100)}%"

    def contains(self, ratio: float, *, closed_upper: bool = False) -> bool:
        if closed_upper:
            return self.lower <= ratio <= self.upper
        return self.lower <= ratio < self.upper


TABLE_BUCKETS: tuple[MaskBucket, ...] = (
    MaskBucket(0.01, 0.10),
    MaskBucket(0.10, 0.20),
    MaskBucket(0.20, 0.30),
    MaskBucket(0.30, 0.40),
    MaskBucket(0.40, 0.50),
    MaskBucket(0.50, 0.60),
)


def bucket_for_ratio(ratio: float) -> MaskBucket | None:
    """Assign a hole ratio to its bucket.

    Boundaries are half-open: a ratio sitting exactly on a boundary belongs to
    the bucket that starts there (0.10 -> 10-20%). The top edge 0.60 closes the
    last bucket so assignment is total on [0.01, 0.60].
    """
    for i, bucket in enumerate(TABLE_BUCKETS):
        closed = i == len(TABLE_BUCKETS) - 1
        if bucket.contains(ratio, closed_upper=closed):
            return bucket
    return None


def _resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    if image.shape == (height, width):
        return image.astype(np.float32, copy=True)
    out = cv2.resize(image.astype(np.float32), (width, height), interpolation=cv2.INTER_LINEAR)
    return np.clip(out, 0.0, 1.0)


def _to_unit_gray(img: Image.Image) -> np.ndarray:
    """Decode a PIL image to a single-channel float32 array in [0, 1].

    8-bit containers are scaled by 255, 16-bit containers by 65535 (per the
    declared bit depth, not per-image, so loading is deterministic). RGB input
    is reduced by averaging the three channels.
    """
    if img.width == 0 or img.height == 0:
        raise ValidationError("zero-sized image")
    mode = img.mode
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    elif mode in ("L", "P"):
        arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    elif mode in ("RGB", "RGBA", "LA"):
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        arr = rgb.mean(axis=2)
    elif mode == "F":
        arr = np.asarray(img, dtype=np.float64)
    else:
        arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def load_tir_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit PNG or 8/16-bit TIFF as a [0, 1] single-channel image."""
    with Image.open(path) as img:
        arr = _to_unit_gray(img)
    validate_image(arr, name=str(path))
    return arr


def train_preprocess(
    image: np.ndarray,
    rng: np.random.Generator,
    size: int = TRAIN_SIZE,
    crop_fraction: float | None = None,
) -> np.ndarray:
    """Random square crop followed by bilinear resize to ``size`` x ``size``.

    The crop side is ``crop_fraction * min(H, W)`` with the fraction sampled
    uniformly from [0.5, 1.0] unless given; the window position is sampled
    uniformly over all valid placements.
    """
    validate_image(image)
    h, w = image.shape
    if h < MIN_TRAIN_INPUT or w < MIN_TRAIN_INPUT:
        raise ValidationError(f"image {h}x{w} smaller than minimum {MIN_TRAIN_INPUT}")
    frac = float(rng.uniform(0.5, 1.0)) if crop_fraction is None else float(crop_fraction)
    if not (0.0 < frac <= 1.0):
        raise ValidationError(f"crop fraction {frac} outside (0, 1]")
    side = max(1, round(frac * min(h, w)))
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    crop = image[top : top + side, left : left + side]
    return _resize_bilinear(crop, size, size)


def test_preprocess(image: np.ndarray) -> np.ndarray:
    """Deterministic eval geometry: resize to 300x375, center-crop 256x256."""
    validate_image(image)
    resized = _resize_bilinear(image, TEST_RESIZE_H, TEST_RESIZE_W)
    top = (TEST_RESIZE_H - TEST_CROP) // 2
    left = (TEST_RESIZE_W - TEST_CROP) // 2
    return resized[top : top + TEST_CROP, left : left + TEST_CROP].copy()


def mask_ratio(mask: np.ndarray) -> float:
    """Fraction of hole (zero) pixels."""
    validate_mask(mask)
    return float(np.count_nonzero(mask == 0.0)) / mask.size


def apply_mask(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Elementwise product; hole pixels become exactly 0."""
    if image.shape != mask.shape:
        raise ValidationError(f"shape mismatch: image {image.shape} vs mask {mask.shape}")
    return (image * mask).astype(np.float32)


def generate_stroke_mask(
    rng: np.random.Generator,
    target_bucket: MaskBucket,
    size: int,
    max_attempts: int = 100,
) -> np.ndarray:
    """Synthesize an irregular mask whose hole ratio lands in ``target_bucket``.

    Holes are drawn as thick random polyline strokes and filled discs, one at a
    time, re-measuring the ratio after every shape. Overshooting the bucket
    restarts the attempt; ``max_attempts`` failed attempts raise
    :class:`MaskGenerationError`.
    """
    if size < 1:
        raise ValidationError("mask size must be positive")
    total = size * size
    max_thickness = max(1, size // 16)
    for _ in range(max_attempts):
        hole = np.zeros((size, size), dtype=np.uint8)
        for _ in range(512):
            ratio = float(np.count_nonzero(hole)) / total
            if target_bucket.contains(ratio) and ratio > 0.0:
                return (1.0 - hole.astype(np.float32)).astype(np.float32)
            if ratio >= target_bucket.upper:
                break
            # Keep each shape's area below the bucket headroom so the loop can
            # settle inside narrow buckets instead of leaping over them.
            budget = max(1.0, (target_bucket.upper - ratio) * total * 0.5)
            if rng.random() < 0.7:
                n_seg = int(rng.integers(1, 5))
                x, y = int(rng.integers(0, size)), int(rng.integers(0, size))
                length = int(rng.integers(size // 8 + 1, size // 2 + 2))
                thickness = int(np.clip(budget / (n_seg * max(length, 1)), 1, max_thickness))
                for _ in range(n_seg):
                    angle = rng.uniform(0, 2 * np.pi)
                    nx = int(np.clip(x + length * np.cos(angle), 0, size - 1))
                    ny = int(np.clip(y + length * np.sin(angle), 0, size - 1))
                    cv2.line(hole, (x, y), (nx, ny), 1, thickness)
                    x, y = nx, ny
            else:
                radius = int(np.clip(np.sqrt(budget / np.pi), 1, max(2, size // 10)))
                cx, cy = int(rng.integers(0, size)), int(rng.integers(0, size))
                cv2.circle(hole, (cx, cy), radius, 1, -1)
        # loop exhausted or overshoot: retry with a fresh canvas
    raise MaskGenerationError(
        f"could not reach bucket {target_bucket.label} at size {size} "
        f"within {max_attempts} attempts"
    )


def load_mask(path: str | Path, size: int | tuple[int, int]) -> np.ndarray:
    """Load an 8-bit grayscale mask file (white = valid) at the requested size.

    Values are thresholded at 0.5, then nearest-neighbor resized so the result
    stays binary. ``size`` is a side length or an (height, width) pair.
    """
    target = (size, size) if isinstance(size, int) else (int(size[0]), int(size[1]))
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    binary = (arr >= 0.5).astype(np.float32)
    if binary.shape != target:
        binary = cv2.resize(binary, (target[1], target[0]), interpolation=cv2.INTER_NEAREST)
    return binary.astype(np.float32)


@dataclasses.dataclass
class DatasetManifest:
    """A split's file list: one relative path per line, optional tab-separated mask path."""

    split: str
    entries: list[tuple[Path, Path | None]]

    @property
    def count(self) -> int:
        return len(self.entries)


def load_manifest(path: str | Path, split: str = "train") -> DatasetManifest:
    path = Path(path)
    base = path.parent
    entries: list[tuple[Path, Path | None]] = []
    missing: list[str] = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        img = base / parts[0]
        msk = base / parts[1] if len(parts) > 1 and parts[1] else None
        if not img.exists():
            missing.append(str(img))
        if msk is not None and not msk.exists():
            missing.append(str(msk))
        entries.append((img, msk))
    if missing:
        raise ValidationError(f"manifest {path} lists missing files: {missing[:5]}")
    if not entries:
        raise ValidationError(f"manifest {path} is empty")
    return DatasetManifest(split=split, entries=entries)

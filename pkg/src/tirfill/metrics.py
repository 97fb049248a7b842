"""Evaluation metrics (PSNR, SSIM, LPIPS, FID) and the bucketed report.

LPIPS and FID need reference feature networks. Both are pluggable: real
calibrated weights can be supplied, and the offline configuration uses
fixed-seed random extractors with the same structure so every property is
testable without downloads. When an extractor or its weights are missing the
metric is reported as unavailable, never as zero.
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from typing import Any, Callable, Iterable

import numpy as np
import torch
from scipy.ndimage import correlate1d
from torch import nn

from .data_pipeline import TABLE_BUCKETS, bucket_for_ratio, mask_ratio
from .errors import ConfigurationError, NumericalError, ValidationError
from .losses import _VGG19_PLAN, PERCEPTUAL_TAPS, FeatureExtractor

PSNR_CAP_DB = 100.0


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ValidationError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    for name, arr in (("pred", pred), ("gt", gt)):
        if arr.size == 0:
            raise ValidationError(f"{name} is empty")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"{name} values outside [0, 1]: [{lo}, {hi}]")


def psnr(pred: np.ndarray, gt: np.ndarray) -> float:
    """10*log10(1/MSE) with peak 1.0, capped at 100 dB for identical inputs."""
    _check_pair(pred, gt)
    mse = float(np.mean((pred.astype(np.float64) - gt.astype(np.float64)) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def _gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    kernel = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def _ssim_map(pred: np.ndarray, gt: np.ndarray, window: int, sigma: float,
              k1: float, k2: float, data_range: float) -> np.ndarray:
    kernel = _gaussian_kernel1d(window, sigma)

    def filt(a: np.ndarray) -> np.ndarray:
        out = correlate1d(a, kernel, axis=0, mode="reflect")
        return correlate1d(out, kernel, axis=1, mode="reflect")

    x = pred.astype(np.float64)
    y = gt.astype(np.float64)
    mu_x = filt(x)
    mu_y = filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim(pred: np.ndarray, gt: np.ndarray, window: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03, data_range: float = 1.0) -> float:
    """Single-scale SSIM, Gaussian-windowed, averaged over window positions
    whose support lies fully inside the image."""
    _check_pair(pred, gt)
    if min(pred.shape) < window:
        raise ValidationError(f"image {pred.shape} smaller than {window}x{window} window")
    ssim_full = _ssim_map(pred, gt, window, sigma, k1, k2, data_range)
    border = window // 2
    return float(ssim_full[border:-border, border:-border].mean())


def _tap_channel_map() -> dict[int, int]:
    channels: dict[int, int] = {}
    idx = 0
    current = 3
    for entry in _VGG19_PLAN:
        if entry == "M":
            channels[idx] = current
            idx += 1
        else:
            channels[idx] = entry
            channels[idx + 1] = entry
            current = entry
            idx += 2
    return channels


def random_lpips_weights(seed: int = 0,
                         taps: tuple[int, ...] = PERCEPTUAL_TAPS) -> dict[int, np.ndarray]:
    """Positive per-channel linear weights for offline LPIPS runs."""
    rng = np.random.default_rng(seed)
    channel_map = _tap_channel_map()
    return {tap: rng.uniform(0.5, 1.5, channel_map[tap]).astype(np.float32)
            for tap in taps}


def lpips(pred: np.ndarray, gt: np.ndarray, extractor: FeatureExtractor | None,
          weights: dict[int, np.ndarray] | None) -> float:
    """Learned perceptual distance: unit-normalized channel features, weighted
    squared differences, spatial average, sum over layers."""
    if extractor is None:
        raise ConfigurationError("LPIPS requires a feature extractor")
    if not weights:
        raise ConfigurationError("LPIPS requires per-layer linear weights")
    _check_pair(pred, gt)
    taps = tuple(sorted(weights))

    def to_t(a: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(np.ascontiguousarray(a, dtype=np.float32))[None, None]

    with torch.no_grad():
        feats_a = extractor(to_t(pred), taps)
        feats_b = extractor(to_t(gt), taps)
        total = 0.0
        for tap in taps:
            fa, fb = feats_a[tap], feats_b[tap]
            w = torch.from_numpy(np.asarray(weights[tap], dtype=np.float32))
            if w.numel() != fa.shape[1]:
                raise ValidationError(
                    f"tap {tap} weights have {w.numel()} channels, features {fa.shape[1]}"
                )
            na = fa / torch.sqrt((fa * fa).sum(dim=1, keepdim=True) + 1e-10)
            nb = fb / torch.sqrt((fb * fb).sum(dim=1, keepdim=True) + 1e-10)
            diff2 = (na - nb) ** 2
            total += float((diff2 * w.view(1, -1, 1, 1)).sum(dim=1).mean())
    return total


@dataclasses.dataclass
class FeatureStatistics:
    """Gaussian fit (mean, covariance) of a feature set."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    @classmethod
    def from_features(cls, features: np.ndarray) -> "FeatureStatistics":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 2:
            raise ValidationError(
                f"need a (N>=2, d) feature matrix, got {features.shape}"
            )
        mean = features.mean(axis=0)
        cov = np.atleast_2d(np.cov(features, rowvar=False))
        return cls(mean=mean, cov=cov, count=features.shape[0])


def _sqrtm_psd(mat: np.ndarray, label: str) -> np.ndarray:
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    floor = float(vals.min())
    scale = max(1.0, float(np.abs(vals).max()))
    if floor < -1e-3 * scale:
        raise NumericalError(
            f"{label} is not positive semi-definite (min eigenvalue {floor:.3e})"
        )
    if floor < -1e-6:
        warnings.warn(
            f"clamping small negative eigenvalue {floor:.3e} in {label}",
            RuntimeWarning,
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(stats_a: FeatureStatistics, stats_b: FeatureStatistics) -> float:
    """Fréchet distance between two Gaussian feature fits."""
    if stats_a.mean.shape != stats_b.mean.shape:
        raise ValidationError("feature dimensionalities differ")
    diff = stats_a.mean - stats_b.mean
    root_a = _sqrtm_psd(stats_a.cov, "covariance A")
    inner = _sqrtm_psd(root_a @ stats_b.cov @ root_a, "cross covariance")
    value = float(diff @ diff + np.trace(stats_a.cov) + np.trace(stats_b.cov)
                  - 2.0 * np.trace(inner))
    if value < -1e-3:
        raise NumericalError(f"FID evaluated to {value:.3e}")
    return max(value, 0.0)


class RandomFeatureEmbedder:
    """Fixed-seed convolutional embedder standing in for an inception network
    when computing FID offline."""

    def __init__(self, dim: int = 64, seed: int = 0):
        torch.manual_seed(seed)
        self.dim = dim
        self.net = nn.Sequential(
            nn.Conv2d(1, 16, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(16, 32, 3, 2, 1), nn.ReLU(),
            nn.AdaptiveAvgPool2d(4), nn.Flatten(),
            nn.Linear(32 * 16, dim),
        )
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.net.eval()

    def __call__(self, images: np.ndarray) -> np.ndarray:
        arr = np.asarray(images, dtype=np.float32)
        if arr.ndim != 3:
            raise ValidationError(f"expected (N, H, W) image stack, got {arr.shape}")
        with torch.no_grad():
            out = self.net(torch.from_numpy(arr)[:, None])
        return out.numpy().astype(np.float64)


@dataclasses.dataclass
class BucketMetrics:
    count: int
    psnr: float | None
    ssim: float | None
    lpips: float | None
    fid: float | None

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class MetricsReport:
    per_bucket: dict[str, BucketMetrics]
    averages: dict[str, float | None]
    skipped: int = 0

    def to_json(self) -> str:
        payload = {
            "per_bucket": {label: bm.as_dict() for label, bm in self.per_bucket.items()},
            "averages": self.averages,
            "skipped": self.skipped,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    def to_text_table(self) -> str:
        labels = [b.label for b in TABLE_BUCKETS]
        col = 10

        def fmt(value: float | None, spec: str) -> str:
            return "-" if value is None else format(value, spec)

        lines = []
        header = "Mask Ratio".ljust(12) + "".join(lbl.rjust(col) for lbl in labels)
        header += "Avg".rjust(col)
        lines.append(header)
        rows = [
            ("PSNR", "psnr", ".2f"),
            ("SSIM", "ssim", ".4f"),
            ("LPIPS", "lpips", ".4f"),
            ("FID", "fid", ".4f"),
        ]
        for title, key, spec in rows:
            cells = []
            for lbl in labels:
                bm = self.per_bucket.get(lbl)
                cells.append(fmt(getattr(bm, key), spec) if bm else "-")
            cells.append(fmt(self.averages.get(key), spec))
            lines.append(title.ljust(12) + "".join(c.rjust(col) for c in cells))
        counts = []
        for lbl in labels:
            bm = self.per_bucket.get(lbl)
            counts.append(str(bm.count) if bm else "-")
        counts.append(str(sum(bm.count for bm in self.per_bucket.values())))
        lines.append("Images".ljust(12) + "".join(c.rjust(col) for c in counts))
        return "\n".join(lines) + "\n"


def evaluate(infer_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
             pairs: Iterable[tuple[np.ndarray, np.ndarray]],
             *,
             extractor: FeatureExtractor | None = None,
             lpips_weights: dict[int, np.ndarray] | None = None,
             embedder: RandomFeatureEmbedder | None = None,
             hole_only: bool = False) -> MetricsReport:
    """Run the model over (image, mask) pairs and aggregate metrics per
    mask-ratio bucket.

    ``hole_only`` restricts the PSNR average to hole pixels (SSIM/LPIPS/FID
    stay full-image; recomposed outputs only differ inside holes anyway).
    Pairs whose ratio falls outside every bucket are counted as skipped.
    LPIPS needs ``extractor`` + ``lpips_weights`` and FID needs ``embedder``
    plus at least two images in the bucket; otherwise those cells are absent.
    """
    acc: dict[str, dict[str, list]] = {}
    for image, mask in pairs:
        if image.shape != mask.shape:
            raise ValidationError("image and mask shapes differ")
        ratio = mask_ratio(mask)
        bucket = bucket_for_ratio(ratio)
        if bucket is None:
            acc.setdefault("__skipped__", {"n": []})["n"].append(1)
            continue
        out = np.asarray(infer_fn(image, mask), dtype=np.float32)
        if out.shape != image.shape:
            raise ValidationError(f"model output shape {out.shape} != input {image.shape}")
        slot = acc.setdefault(bucket.label, {"psnr": [], "ssim": [], "lpips": [],
                                             "pred": [], "gt": []})
        if hole_only:
            hole = mask == 0.0
            mse = float(np.mean((out[hole].astype(np.float64)
                                 - image[hole].astype(np.float64)) ** 2))
            slot["psnr"].append(PSNR_CAP_DB if mse <= 0.0
                                else min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse)))
        else:
            slot["psnr"].append(psnr(out, image))
        slot["ssim"].append(ssim(out, image))
        if extractor is not None and lpips_weights:
            slot["lpips"].append(lpips(out, image, extractor, lpips_weights))
        if embedder is not None:
            slot["pred"].append(out)
            slot["gt"].append(image)

    per_bucket: dict[str, BucketMetrics] = {}
    for bucket in TABLE_BUCKETS:
        slot = acc.get(bucket.label)
        if not slot:
            continue
        count = len(slot["psnr"])
        fid_val = None
        if embedder is not None and count >= 2:
            stats_pred = FeatureStatistics.from_features(embedder(np.stack(slot["pred"])))
            stats_gt = FeatureStatistics.from_features(embedder(np.stack(slot["gt"])))
            fid_val = fid(stats_pred, stats_gt)
        per_bucket[bucket.label] = BucketMetrics(
            count=count,
            psnr=float(np.mean(slot["psnr"])),
            ssim=float(np.mean(slot["ssim"])),
            lpips=float(np.mean(slot["lpips"])) if slot["lpips"] else None,
            fid=fid_val,
        )

    averages: dict[str, float | None] = {}
    for key in ("psnr", "ssim", "lpips", "fid"):
        values = [getattr(bm, key) for bm in per_bucket.values()
                  if getattr(bm, key) is not None]
        averages[key] = float(np.mean(values)) if values else None

    skipped = len(acc.get("__skipped__", {}).get("n", []))
    return MetricsReport(per_bucket=per_bucket, averages=averages, skipped=skipped)

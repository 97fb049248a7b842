"""End-to-end inference: edge connection, edge-guided completion, and
refinement, each followed by recomposition so valid pixels pass through
bit-exactly. Arbitrary sizes are reflect-padded to a multiple of 4 and
cropped back."""

from __future__ import annotations

import dataclasses
import time
from pathlib import Path
from typing import Any

import numpy as np
import torch

from . import edge_ops
from .checkpoint import checkpoint_id, load_bundle
from .data_pipeline import validate_image, validate_mask
from .errors import ValidationError
from .networks import ModelBundle


@dataclasses.dataclass
class InpaintResult:
    result: np.ndarray
    timings_ms: dict[str, float]
    edge: np.ndarray | None = None
    coarse: np.ndarray | None = None
    raw: np.ndarray | None = None
    padded: bool = False


def _pad_to_multiple(arr: np.ndarray, multiple: int = 4) -> tuple[np.ndarray, tuple[int, int]]:
    h, w = arr.shape
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h == 0 and pad_w == 0:
        return arr, (0, 0)
    return np.pad(arr, ((0, pad_h), (0, pad_w)), mode="reflect"), (pad_h, pad_w)


class InpaintPipeline:
    """The trained three-stage model behind a single inpaint call."""

    def __init__(self, bundle: ModelBundle, *,
                 canny_low: float = edge_ops.DEFAULT_LOW_THRESHOLD,
                 canny_high: float = edge_ops.DEFAULT_HIGH_THRESHOLD,
                 mask_input_edges: bool = True):
        self.bundle = bundle
        self.canny_low = canny_low
        self.canny_high = canny_high
        self.mask_input_edges = mask_input_edges
        self.checkpoint_path: Path | None = None
        self.checkpoint_sha256: str | None = None
        self.header: dict[str, Any] = {}
        bundle.set_eval()
        for module in bundle.modules_by_name().values():
            for p in module.parameters():
                p.requires_grad_(False)

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "InpaintPipeline":
        bundle, header, _ = load_bundle(path)
        tc = header.get("train_config", {})
        pipe = cls(
            bundle,
            canny_low=float(tc.get("canny_low", edge_ops.DEFAULT_LOW_THRESHOLD)),
            canny_high=float(tc.get("canny_high", edge_ops.DEFAULT_HIGH_THRESHOLD)),
            mask_input_edges=bool(tc.get("mask_input_edges", True)),
        )
        pipe.checkpoint_path = Path(path)
        pipe.checkpoint_sha256 = checkpoint_id(path)
        pipe.header = header
        return pipe

    def config_summary(self) -> dict[str, Any]:
        cfg = dataclasses.asdict(self.bundle.config)
        cfg["canny_low"] = self.canny_low
        cfg["canny_high"] = self.canny_high
        cfg["stage"] = self.header.get("stage")
        cfg["step"] = self.header.get("step")
        return cfg

    def inpaint(self, image: np.ndarray, mask: np.ndarray,
                return_debug: bool = False) -> InpaintResult:
        validate_image(image)
        validate_mask(mask)
        if image.shape != mask.shape:
            raise ValidationError(
                f"image {image.shape} and mask {mask.shape} shapes differ"
            )
        if min(image.shape) < 4:
            raise ValidationError(f"image too small to inpaint: {image.shape}")
        h, w = image.shape
        image_p, pads = _pad_to_multiple(image.astype(np.float32, copy=False))
        mask_p, _ = _pad_to_multiple(mask.astype(np.float32, copy=False))
        padded = pads != (0, 0)

        timings: dict[str, float] = {}
        t0 = time.perf_counter()
        image_in = image_p * mask_p
        edge_in = edge_ops.canny(image_in, self.canny_low, self.canny_high)
        if self.mask_input_edges:
            edge_in = edge_in * mask_p

        as_t = lambda a: torch.from_numpy(np.ascontiguousarray(a, dtype=np.float32))[None, None]
        m_t = as_t(mask_p)
        in_t = as_t(image_in)
        e_t = as_t(edge_in)

        with torch.no_grad():
            edge_prob = self.bundle.edge_generator(m_t, in_t, e_t)
            edge_pred = (edge_prob >= edge_ops.BINARIZE_THRESHOLD).to(edge_prob.dtype)
            edge_rec = e_t + edge_pred * (1.0 - m_t)
            timings["edge_ms"] = (time.perf_counter() - t0) * 1000.0

            t1 = time.perf_counter()
            coarse = self.bundle.completion(m_t, in_t, edge_rec)
            coarse_rec = in_t + coarse * (1.0 - m_t)
            timings["completion_ms"] = (time.perf_counter() - t1) * 1000.0

            t2 = time.perf_counter()
            refined = self.bundle.refinement(m_t, coarse_rec)
            refined_rec = in_t + refined * (1.0 - m_t)
            timings["refinement_ms"] = (time.perf_counter() - t2) * 1000.0

        def crop(t: torch.Tensor) -> np.ndarray:
            return t[0, 0, :h, :w].numpy().astype(np.float32)

        result = InpaintResult(
            result=np.clip(crop(refined_rec), 0.0, 1.0),
            timings_ms=timings,
            padded=padded,
        )
        if return_debug:
            result.edge = crop(edge_rec)
            result.coarse = np.clip(crop(coarse_rec), 0.0, 1.0)
            result.raw = np.clip(crop(refined), 0.0, 1.0)
        return result

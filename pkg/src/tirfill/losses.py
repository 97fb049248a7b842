"""Training objectives: hinge adversarial terms and the l1 + perceptual +
style reconstruction loss over VGG-19 feature taps.

The extractor is built in-package with the standard VGG-19 topology. Real
pretrained weights are loaded from ``$TIRFILL_WEIGHTS_DIR/vgg19_features.pt``
when present; otherwise a fixed-seed random initialization with the same
topology is used so every loss property holds offline. Extractor parameters
never receive gradients.
"""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError, ValidationError

PERCEPTUAL_TAPS = (2, 7, 12, 21, 30)
STYLE_TAPS = (9, 18, 27, 32)

# Channel plan of VGG-19 feature layers ("M" = 2x2 max pool).
_VGG19_PLAN = [
    64, 64, "M",
    128, 128, "M",
    256, 256, 256, 256, "M",
    512, 512, 512, 512, "M",
    512, 512, 512, 512, "M",
]

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)

WEIGHTS_ENV_VAR = "TIRFILL_WEIGHTS_DIR"
VGG_WEIGHTS_FILENAME = "vgg19_features.pt"


def _build_vgg_features() -> nn.Sequential:
    layers: list[nn.Module] = []
    in_ch = 3
    for entry in _VGG19_PLAN:
        if entry == "M":
            layers.append(nn.MaxPool2d(2, 2))
        else:
            layers.append(nn.Conv2d(in_ch, entry, 3, 1, 1))
            layers.append(nn.ReLU(inplace=False))
            in_ch = entry
    return nn.Sequential(*layers)


class FeatureExtractor(nn.Module):
    """Frozen VGG-19 feature tap extractor.

    Input is a [0,1] image batch with 1 or 3 channels; single-channel input
    is replicated to 3 before the standard per-channel normalization.
    ``forward`` returns a dict mapping tap index to the activation after that
    layer, running the stack only as deep as the largest requested tap.
    """

    ALL_TAPS = tuple(sorted(set(PERCEPTUAL_TAPS) | set(STYLE_TAPS)))

    def __init__(self, taps: tuple[int, ...] | None = None):
        super().__init__()
        self.taps = tuple(sorted(taps)) if taps else self.ALL_TAPS
        self.features = _build_vgg_features()
        if self.taps[-1] >= len(self.features):
            raise ValidationError(f"tap {self.taps[-1]} beyond layer count {len(self.features)}")
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    @classmethod
    def random(cls, seed: int = 0, taps: tuple[int, ...] | None = None) -> "FeatureExtractor":
        torch.manual_seed(seed)
        return cls(taps)

    @classmethod
    def pretrained(cls, path: str | Path | None = None,
                   taps: tuple[int, ...] | None = None) -> "FeatureExtractor":
        if path is None:
            root = os.environ.get(WEIGHTS_ENV_VAR)
            if not root:
                raise ConfigurationError(
                    f"no weight path given and {WEIGHTS_ENV_VAR} is unset"
                )
            path = Path(root) / VGG_WEIGHTS_FILENAME
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"extractor weight file not found: {path}")
        inst = cls(taps)
        state = torch.load(path, map_location="cpu", weights_only=True)
        inst.features.load_state_dict(state)
        for p in inst.parameters():
            p.requires_grad_(False)
        return inst

    @classmethod
    def default(cls, seed: int = 0, taps: tuple[int, ...] | None = None) -> "FeatureExtractor":
        """Pretrained when a weight file is available, seeded random otherwise."""
        root = os.environ.get(WEIGHTS_ENV_VAR)
        if root and (Path(root) / VGG_WEIGHTS_FILENAME).is_file():
            return cls.pretrained(Path(root) / VGG_WEIGHTS_FILENAME, taps)
        return cls.random(seed, taps)

    def forward(self, x: torch.Tensor,
                taps: tuple[int, ...] | None = None) -> dict[int, torch.Tensor]:
        wanted = tuple(sorted(taps)) if taps else self.taps
        if x.dim() != 4:
            raise ValidationError(f"expected (B, C, H, W), got {tuple(x.shape)}")
        if x.shape[1] == 1:
            x = x.expand(-1, 3, -1, -1)
        elif x.shape[1] != 3:
            raise ValidationError(f"expected 1 or 3 channels, got {x.shape[1]}")
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        out: dict[int, torch.Tensor] = {}
        last = wanted[-1]
        for idx, layer in enumerate(self.features):
            x = layer(x)
            if idx in wanted:
                out[idx] = x
            if idx == last:
                break
        return out


@dataclasses.dataclass
class LossReport:
    """Weighted loss components; ``total`` equals their sum."""

    total: torch.Tensor
    components: dict[str, torch.Tensor]

    def scalars(self) -> dict[str, float]:
        out = {name: float(value.detach()) for name, value in self.components.items()}
        out["total"] = float(self.total.detach())
        return out


def hinge_generator_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    return -fake_scores.mean()


def hinge_discriminator_loss(real_scores: torch.Tensor,
                             fake_scores: torch.Tensor) -> torch.Tensor:
    return F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()


def gram_matrix(feature: torch.Tensor) -> torch.Tensor:
    """Per-sample channel Gram matrix normalized by channels * H * W."""
    b, c, h, w = feature.shape
    flat = feature.reshape(b, c, h * w)
    return torch.bmm(flat, flat.transpose(1, 2)) / (c * h * w)


def reconstruction_loss(pred: torch.Tensor, gt: torch.Tensor,
                        extractor: FeatureExtractor | None,
                        weights: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> LossReport:
    """l1 + perceptual + style, each weighted; components stored post-weight."""
    if pred.shape != gt.shape:
        raise ValidationError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    w_l1, w_perc, w_style = weights
    components: dict[str, torch.Tensor] = {}
    components["l1"] = w_l1 * (pred - gt).abs().mean()
    if w_perc != 0.0 or w_style != 0.0:
        if extractor is None:
            raise ConfigurationError(
                "feature extractor required for perceptual/style terms"
            )
        taps = tuple(sorted(set(PERCEPTUAL_TAPS) | set(STYLE_TAPS)))
        feats_pred = extractor(pred, taps)
        feats_gt = extractor(gt, taps)
        zero = pred.new_zeros(())
        perc = zero
        for i in PERCEPTUAL_TAPS:
            perc = perc + (feats_pred[i] - feats_gt[i]).abs().mean()
        style = zero
        for j in STYLE_TAPS:
            style = style + (gram_matrix(feats_pred[j]) - gram_matrix(feats_gt[j])).abs().mean()
        components["perceptual"] = w_perc * perc
        components["style"] = w_style * style
    else:
        zero = pred.new_zeros(())
        components["perceptual"] = zero
        components["style"] = zero
    total = components["l1"] + components["perceptual"] + components["style"]
    return LossReport(total=total, components=components)


def stage_loss_completion(pred: torch.Tensor, gt: torch.Tensor,
                          extractor: FeatureExtractor | None,
                          weights: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> LossReport:
    """Coarse stage objective: pure reconstruction, no adversarial term."""
    return reconstruction_loss(pred, gt, extractor, weights)


def stage_loss_refinement(pred: torch.Tensor, gt: torch.Tensor,
                          fake_scores: torch.Tensor,
                          extractor: FeatureExtractor | None,
                          w_adv: float = 1.0,
                          weights: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> LossReport:
    """Refinement objective: reconstruction plus weighted hinge generator term."""
    report = reconstruction_loss(pred, gt, extractor, weights)
    adv = w_adv * hinge_generator_loss(fake_scores)
    components = dict(report.components)
    components["adversarial"] = adv
    return LossReport(total=report.total + adv, components=components)

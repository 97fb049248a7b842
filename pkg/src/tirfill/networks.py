"""Generators and discriminators of the three-stage inpainting model.

All forwards take ``(B, 1, H, W)`` tensors; masks and edge maps are {0,1}
floats, images live in [0, 1] and are shifted to [-1, 1] internally at the
network boundary. Generator outputs are mapped back to [0, 1].

The edge-aware normalization layer (``EagNorm``) instance-normalizes features
and modulates them with per-position scale and shift convolved from the
reconstructed edge map. ``eag_enabled=False`` swaps it for conventional
instance normalization (the ablation variant): the block output then no
longer depends on the edge map.
"""

from __future__ import annotations

import dataclasses

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm

from .errors import ValidationError

INSTANCE_NORM_EPS = 1e-5


def instance_norm(x: torch.Tensor, eps: float = INSTANCE_NORM_EPS) -> torch.Tensor:
    """Per-(sample, channel) zero-mean unit-variance normalization, no affine."""
    mean = x.mean(dim=(2, 3), keepdim=True)
    var = x.var(dim=(2, 3), unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps)


def _check_grids(*tensors: torch.Tensor, divisible_by: int = 4) -> None:
    shape = tensors[0].shape
    for t in tensors:
        if t.dim() != 4 or t.shape[1] != 1:
            raise ValidationError(f"expected (B, 1, H, W) tensors, got {tuple(t.shape)}")
        if t.shape != shape:
            raise ValidationError(f"input shapes differ: {tuple(t.shape)} vs {tuple(shape)}")
    h, w = shape[2], shape[3]
    if h % divisible_by or w % divisible_by:
        raise ValidationError(f"spatial size {h}x{w} not divisible by {divisible_by}")


@dataclasses.dataclass
class NetworkConfig:
    base_width: int = 64
    edge_blocks: int = 8
    completion_blocks: int = 6
    eag_enabled: bool = True
    gated_enabled: bool = True
    input_size: int = 256
    eag_hidden: int = 128
    disc_base_width: int = 64
    disc_downsamples: int = 3

    def __post_init__(self) -> None:
        if self.base_width < 8:
            raise ValidationError("base_width must be >= 8")
        if self.edge_blocks < 1 or self.completion_blocks < 1:
            raise ValidationError("block counts must be >= 1")


class EagNorm(nn.Module):
    """Instance normalization modulated by the recomposed edge map.

    The edge map is nearest-resized to the feature resolution, projected by a
    shared 3x3 conv + ReLU, and two conv heads emit the per-position,
    per-channel scale and shift applied to the normalized feature. The scale
    head's bias starts at 1 so the layer begins near plain normalization.
    """

    def __init__(self, channels: int, hidden: int = 128, enabled: bool = True):
        super().__init__()
        self.channels = channels
        self.enabled = enabled
        if enabled:
            self.shared = nn.Conv2d(1, hidden, 3, 1, 1)
            self.gamma_head = nn.Conv2d(hidden, channels, 3, 1, 1)
            self.beta_head = nn.Conv2d(hidden, channels, 3, 1, 1)
            with torch.no_grad():
                self.gamma_head.bias.fill_(1.0)
        else:
            self.norm = nn.InstanceNorm2d(channels, affine=True)

    def forward(self, feature: torch.Tensor, edge: torch.Tensor) -> torch.Tensor:
        if feature.shape[1] != self.channels:
            raise ValidationError(
                f"feature has {feature.shape[1]} channels, layer expects {self.channels}"
            )
        if not self.enabled:
            return self.norm(feature)
        normalized = instance_norm(feature)
        if edge.shape[2:] != feature.shape[2:]:
            edge = F.interpolate(edge, size=feature.shape[2:], mode="nearest")
        act = F.relu(self.shared(edge))
        gamma = self.gamma_head(act)
        beta = self.beta_head(act)
        return normalized * gamma + beta


class EagResBlock(nn.Module):
    """Residual block whose normalization layers take the edge map."""

    def __init__(self, channels: int, hidden: int = 128, enabled: bool = True):
        super().__init__()
        self.norm1 = EagNorm(channels, hidden, enabled)
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1, padding_mode="reflect")
        self.norm2 = EagNorm(channels, hidden, enabled)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1, padding_mode="reflect")

    def forward(self, x: torch.Tensor, edge: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.relu(self.norm1(x, edge)))
        h = self.conv2(F.relu(self.norm2(h, edge)))
        return x + h


class _DilatedResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 2, dilation=2, padding_mode="reflect"),
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, 1, 1, padding_mode="reflect"),
            nn.InstanceNorm2d(channels, affine=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


class EdgeGenerator(nn.Module):
    """Predicts an edge probability grid from (mask, broken image, broken edges)."""

    def __init__(self, base_width: int = 64, blocks: int = 8):
        super().__init__()
        w = base_width
        self.encoder = nn.Sequential(
            nn.Conv2d(3, w, 7, 1, 3, padding_mode="reflect"),
            nn.InstanceNorm2d(w, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 4, 2, 1),
            nn.InstanceNorm2d(2 * w, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 4 * w, 4, 2, 1),
            nn.InstanceNorm2d(4 * w, affine=True),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.Sequential(*[_DilatedResBlock(4 * w) for _ in range(blocks)])
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(4 * w, 2 * w, 4, 2, 1),
            nn.InstanceNorm2d(2 * w, affine=True),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(2 * w, w, 4, 2, 1),
            nn.InstanceNorm2d(w, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 1, 7, 1, 3, padding_mode="reflect"),
        )

    def forward(self, mask: torch.Tensor, image_in: torch.Tensor, edge_in: torch.Tensor) -> torch.Tensor:
        _check_grids(mask, image_in, edge_in)
        x = torch.cat([mask, image_in * 2.0 - 1.0, edge_in], dim=1)
        x = self.encoder(x)
        x = self.blocks(x)
        return torch.sigmoid(self.decoder(x))


class CompletionNet(nn.Module):
    """Coarse inpainting network. The recomposed edge map enters only through
    the EAG normalization layers, so disabling them removes every edge
    dependency from the forward pass."""

    def __init__(self, base_width: int = 64, blocks: int = 6, eag_hidden: int = 128, eag_enabled: bool = True):
        super().__init__()
        w = base_width
        self.eag_enabled = eag_enabled
        self.encoder = nn.Sequential(
            nn.Conv2d(2, w, 7, 1, 3, padding_mode="reflect"),
            nn.InstanceNorm2d(w, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 4, 2, 1),
            nn.InstanceNorm2d(2 * w, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 4 * w, 4, 2, 1),
            nn.InstanceNorm2d(4 * w, affine=True),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.ModuleList(
            [EagResBlock(4 * w, eag_hidden, eag_enabled) for _ in range(blocks)]
        )
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(4 * w, 2 * w, 3, 1, 1, padding_mode="reflect"),
            nn.InstanceNorm2d(2 * w, affine=True),
            nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * w, w, 3, 1, 1, padding_mode="reflect"),
            nn.InstanceNorm2d(w, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 1, 7, 1, 3, padding_mode="reflect"),
        )

    def forward(self, mask: torch.Tensor, image_in: torch.Tensor, edge_rec: torch.Tensor) -> torch.Tensor:
        _check_grids(mask, image_in, edge_rec)
        x = torch.cat([mask, image_in * 2.0 - 1.0], dim=1)
        x = self.encoder(x)
        for block in self.blocks:
            x = block(x, edge_rec)
        x = self.decoder(x)
        return (torch.tanh(x) + 1.0) / 2.0


class GatedConv2d(nn.Module):
    """Two parallel convolutions: a sigmoid gate multiplies the swish-activated
    feature branch per channel and position. With ``gated=False`` the gate
    branch is dropped and the layer reduces to conv + swish."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int = 1,
                 padding: int = 0, dilation: int = 1, gated: bool = True):
        super().__init__()
        self.gated = gated
        self.conv_feature = nn.Conv2d(in_ch, out_ch, kernel, stride, padding, dilation)
        if gated:
            self.conv_gate = nn.Conv2d(in_ch, out_ch, kernel, stride, padding, dilation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        feat = self.conv_feature(x)
        feat = F.silu(feat)
        if not self.gated:
            return feat
        return torch.sigmoid(self.conv_gate(x)) * feat


class RefinementNet(nn.Module):
    """Gated-convolution encoder-decoder refining the coarse recomposed image."""

    def __init__(self, base_width: int = 64, gated: bool = True):
        super().__init__()
        w = base_width
        self.encoder = nn.Sequential(
            GatedConv2d(2, w, 5, 1, 2, gated=gated),
            GatedConv2d(w, 2 * w, 4, 2, 1, gated=gated),
            GatedConv2d(2 * w, 2 * w, 3, 1, 1, gated=gated),
            GatedConv2d(2 * w, 4 * w, 4, 2, 1, gated=gated),
        )
        self.bottleneck = nn.Sequential(
            GatedConv2d(4 * w, 4 * w, 3, 1, 2, dilation=2, gated=gated),
            GatedConv2d(4 * w, 4 * w, 3, 1, 4, dilation=4, gated=gated),
            GatedConv2d(4 * w, 4 * w, 3, 1, 8, dilation=8, gated=gated),
        )
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            GatedConv2d(4 * w, 2 * w, 3, 1, 1, gated=gated),
            nn.Upsample(scale_factor=2, mode="nearest"),
            GatedConv2d(2 * w, w, 3, 1, 1, gated=gated),
            nn.Conv2d(w, 1, 3, 1, 1),
        )

    def forward(self, mask: torch.Tensor, coarse_rec: torch.Tensor) -> torch.Tensor:
        _check_grids(mask, coarse_rec)
        x = torch.cat([mask, coarse_rec * 2.0 - 1.0], dim=1)
        x = self.encoder(x)
        x = self.bottleneck(x)
        x = self.decoder(x)
        return (torch.tanh(x) + 1.0) / 2.0


class PatchDiscriminator(nn.Module):
    """Spectral-normalized patch discriminator returning an unbounded score grid.

    ``downsamples`` stride-2 convs are followed by one stride-1 conv and the
    output conv (all 4x4, leaky ReLU 0.2 in between). With the default 3
    downsamples the receptive field is 70 pixels and a 256x256 input yields a
    30x30 score grid.
    """

    def __init__(self, in_channels: int = 1, base_width: int = 64, downsamples: int = 3):
        super().__init__()
        layers: list[nn.Module] = []
        prev = in_channels
        width = base_width
        strides = [2] * downsamples + [1]
        for s in strides:
            layers.append(spectral_norm(nn.Conv2d(prev, width, 4, s, 1)))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            prev = width
            width = min(width * 2, base_width * 8)
        layers.append(spectral_norm(nn.Conv2d(prev, 1, 4, 1, 1)))
        self.layers = nn.Sequential(*layers)

        rf, jump = 1, 1
        for s in strides + [1]:
            rf += 3 * jump
            jump *= s
        self.receptive_field = rf

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4:
            raise ValidationError(f"expected (B, C, H, W) input, got {tuple(x.shape)}")
        if min(x.shape[2], x.shape[3]) < self.receptive_field:
            raise ValidationError(
                f"input {x.shape[2]}x{x.shape[3]} smaller than the "
                f"{self.receptive_field}-pixel receptive field"
            )
        return self.layers(x)


@dataclasses.dataclass
class ModelBundle:
    edge_generator: EdgeGenerator
    completion: CompletionNet
    refinement: RefinementNet
    disc_edge: PatchDiscriminator
    disc_image: PatchDiscriminator
    config: NetworkConfig

    def modules_by_name(self) -> dict[str, nn.Module]:
        return {
            "edge_generator": self.edge_generator,
            "completion": self.completion,
            "refinement": self.refinement,
            "disc_edge": self.disc_edge,
            "disc_image": self.disc_image,
        }

    def set_eval(self) -> None:
        for module in self.modules_by_name().values():
            module.eval()


def build_models(config: NetworkConfig, seed: int = 0) -> ModelBundle:
    """Deterministically initialize all networks from a seed."""
    torch.manual_seed(seed)
    return ModelBundle(
        edge_generator=EdgeGenerator(config.base_width, config.edge_blocks),
        completion=CompletionNet(
            config.base_width, config.completion_blocks, config.eag_hidden, config.eag_enabled
        ),
        refinement=RefinementNet(config.base_width, config.gated_enabled),
        disc_edge=PatchDiscriminator(1, config.disc_base_width, config.disc_downsamples),
        disc_image=PatchDiscriminator(1, config.disc_base_width, config.disc_downsamples),
        config=config,
    )

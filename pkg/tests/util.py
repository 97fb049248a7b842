"""Shared test helpers: finite-difference gradient checks and tiny fixtures."""

from __future__ import annotations

import numpy as np
import torch

from tirfill.networks import NetworkConfig
from tirfill.training import TrainConfig


def fd_gradient(scalar_fn, wrt: torch.Tensor, eps: float = 1e-3) -> torch.Tensor:
    """Central-difference gradient of ``scalar_fn()`` w.r.t. ``wrt`` (in-place
    perturbation, so the closure must read the same tensor object)."""
    grad = torch.zeros_like(wrt)
    flat = wrt.reshape(-1)
    gflat = grad.reshape(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + eps
            up = float(scalar_fn())
            flat[i] = orig - eps
            down = float(scalar_fn())
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
    return grad


def check_gradient(scalar_fn, wrt: torch.Tensor, eps: float = 1e-3,
                   tol: float = 1e-3) -> float:
    """Compare autograd against central differences; returns the relative
    error ‖g_a − g_n‖ / max(‖g_a‖, ‖g_n‖)."""
    assert wrt.dtype == torch.float64, "gradient checks are 64-bit only"
    wrt.requires_grad_(True)
    wrt.grad = None
    out = scalar_fn()
    out.backward()
    analytic = wrt.grad.detach().clone()
    wrt.requires_grad_(False)
    numeric = fd_gradient(scalar_fn, wrt, eps)
    denom = max(float(analytic.norm()), float(numeric.norm()), 1e-12)
    rel = float((analytic - numeric).norm()) / denom
    assert rel < tol, f"finite-difference mismatch: rel err {rel:.3e} >= {tol}"
    return rel


def projection_scalar(out: torch.Tensor, seed: int = 0) -> torch.Tensor:
    """Deterministic random projection of a tensor output to a scalar, so the
    gradient check covers every output element with distinct weights."""
    gen = torch.Generator().manual_seed(seed)
    proj = torch.randn(out.shape, generator=gen, dtype=out.dtype)
    return (out * proj).sum()


def tiny_net_config(**overrides) -> NetworkConfig:
    base = dict(base_width=8, edge_blocks=1, completion_blocks=1, eag_hidden=16,
                disc_base_width=8, disc_downsamples=2, input_size=64)
    base.update(overrides)
    return NetworkConfig(**base)


def tiny_train_config(checkpoint_dir, **overrides) -> TrainConfig:
    base = dict(base_width=8, edge_blocks=1, completion_blocks=1, eag_hidden=16,
                disc_base_width=8, disc_downsamples=2, batch_size=1, train_size=64,
                seed=0, steps_edge=2, steps_completion=2, steps_refinement=2,
                checkpoint_dir=str(checkpoint_dir), checkpoint_every=0,
                feature_extractor="none", w_perc=0.0, w_style=0.0)
    base.update(overrides)
    return TrainConfig(**base)


def smooth_image(size: int = 64, seed: int = 0) -> np.ndarray:
    """Structured grayscale fixture: gradient, sine bands, one bright blob."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    img = 0.35 + 0.3 * xx + 0.1 * np.sin(6.28 * yy)
    img += 0.15 * np.exp(-((xx - 0.3) ** 2 + (yy - 0.6) ** 2) / 0.02)
    img += 0.02 * rng.standard_normal((size, size))
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def random_binary_mask(rng: np.random.Generator, shape, p_hole: float = 0.3) -> np.ndarray:
    return (rng.random(shape) >= p_hole).astype(np.float32)

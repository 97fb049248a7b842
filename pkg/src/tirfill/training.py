"""Sequential three-stage training with upstream freezing.

Stage order: edge generator (adversarial), completion (reconstruction),
refinement (reconstruction + adversarial). Each stage loads the upstream
checkpoint, freezes upstream parameters, and writes periodic and final
checkpoints containing the whole model bundle, its optimizer state, and the
data/torch RNG states so a resumed run reproduces the uninterrupted one
bit-compatibly.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import torch

from . import edge_ops
from .checkpoint import load_checkpoint, save_bundle
from .data_pipeline import (
    TABLE_BUCKETS,
    MaskBucket,
    generate_stroke_mask,
    load_tir_image,
    train_preprocess,
    validate_image,
    validate_mask,
)
from .errors import ConfigurationError, TrainingError, ValidationError
from .losses import (
    FeatureExtractor,
    hinge_discriminator_loss,
    hinge_generator_loss,
    stage_loss_completion,
    stage_loss_refinement,
)
from .networks import ModelBundle, NetworkConfig, build_models
from .pipeline import InpaintPipeline

STAGES = ("edge", "completion", "refinement")


@dataclasses.dataclass
class TrainConfig:
    lr_edge: float = 1e-3
    lr_completion: float = 1e-4
    lr_refinement: float = 1e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    adam_eps: float = 1e-8
    batch_size: int = 8
    steps_edge: int = 2000
    steps_completion: int = 2000
    steps_refinement: int = 2000
    seed: int = 0
    train_size: int = 256
    base_width: int = 64
    edge_blocks: int = 8
    completion_blocks: int = 6
    eag_hidden: int = 128
    eag_enabled: bool = True
    gated_enabled: bool = True
    disc_base_width: int = 64
    disc_downsamples: int = 3
    checkpoint_dir: str = "checkpoints"
    checkpoint_every: int = 500
    canny_low: float = edge_ops.DEFAULT_LOW_THRESHOLD
    canny_high: float = edge_ops.DEFAULT_HIGH_THRESHOLD
    mask_input_edges: bool = True
    w_l1: float = 1.0
    w_perc: float = 1.0
    w_style: float = 1.0
    w_adv: float = 1.0
    edge_l1_weight: float = 0.0
    feature_extractor: str = "default"
    extractor_seed: int = 0
    joint_finetune: bool = False
    deterministic: bool = True

    def __post_init__(self) -> None:
        for name in ("lr_edge", "lr_completion", "lr_refinement"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("adam_beta1", "adam_beta2"):
            beta = getattr(self, name)
            if not (0.0 <= beta < 1.0):
                raise ValidationError(f"{name} must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        for name in ("steps_edge", "steps_completion", "steps_refinement"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.feature_extractor not in ("default", "random", "pretrained", "none"):
            raise ConfigurationError(
                f"unknown feature_extractor {self.feature_extractor!r}"
            )

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(
            base_width=self.base_width,
            edge_blocks=self.edge_blocks,
            completion_blocks=self.completion_blocks,
            eag_enabled=self.eag_enabled,
            gated_enabled=self.gated_enabled,
            input_size=self.train_size,
            eag_hidden=self.eag_hidden,
            disc_base_width=self.disc_base_width,
            disc_downsamples=self.disc_downsamples,
        )

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def header_dict(self) -> dict[str, Any]:
        """Config as stored in checkpoint headers: location fields stripped so
        equal-seed runs in different directories stay byte-identical."""
        out = self.to_dict()
        out.pop("checkpoint_dir", None)
        return out

    @classmethod
    def from_mapping(cls, mapping: dict[str, Any]) -> "TrainConfig":
        kwargs: dict[str, Any] = {}
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key, raw in mapping.items():
            if key not in fields:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(raw, fields[key].type, key)
        return cls(**kwargs)


def _coerce(raw: Any, type_name: str, key: str) -> Any:
    if not isinstance(raw, str):
        return raw
    base = str(type_name)
    if base == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"cannot parse boolean for {key!r}: {raw!r}")
    try:
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {key!r}: {raw!r}") from exc
    return raw


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` config file; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_train_config(path: str | Path) -> TrainConfig:
    return TrainConfig.from_mapping(parse_kv_file(path))


def adam_step(param: torch.Tensor, grad: torch.Tensor, m: torch.Tensor,
              v: torch.Tensor, step: int, lr: float, beta1: float = 0.5,
              beta2: float = 0.9, eps: float = 1e-8,
              name: str = "param") -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """One bias-corrected Adam update; pure, returns new (param, m, v)."""
    if step < 1:
        raise ValidationError("Adam step counter must be >= 1")
    if not torch.isfinite(grad).all():
        raise TrainingError(f"non-finite gradient in {name}")
    m_new = beta1 * m + (1.0 - beta1) * grad
    v_new = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m_new / (1.0 - beta1 ** step)
    v_hat = v_new / (1.0 - beta2 ** step)
    param_new = param - lr * m_hat / (v_hat ** 0.5 + eps)
    return param_new, m_new, v_new


class Adam:
    """Named-parameter Adam whose state round-trips through checkpoints."""

    def __init__(self, named_params: dict[str, torch.Tensor], lr: float,
                 beta1: float = 0.5, beta2: float = 0.9, eps: float = 1e-8):
        self.params = dict(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {n: torch.zeros_like(p) for n, p in self.params.items()}
        self.v = {n: torch.zeros_like(p) for n, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        with torch.no_grad():
            for name, p in self.params.items():
                if p.grad is None:
                    continue
                new_p, self.m[name], self.v[name] = adam_step(
                    p, p.grad, self.m[name], self.v[name], self.step_count,
                    self.lr, self.beta1, self.beta2, self.eps, name=name,
                )
                p.copy_(new_p)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {
            f"{prefix}/step": np.array([float(self.step_count)], dtype=np.float32)
        }
        for name in self.params:
            out[f"{prefix}/m/{name}"] = self.m[name].detach().cpu().numpy()
            out[f"{prefix}/v/{name}"] = self.v[name].detach().cpu().numpy()
        return out

    def load_state_arrays(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        key = f"{prefix}/step"
        if key not in arrays:
            raise ValidationError(f"checkpoint missing optimizer state {key!r}")
        self.step_count = int(round(float(arrays[key][0])))
        for name in self.params:
            self.m[name] = torch.from_numpy(np.array(arrays[f"{prefix}/m/{name}"]))
            self.v[name] = torch.from_numpy(np.array(arrays[f"{prefix}/v/{name}"]))


class ArrayDataset:
    """In-memory source of training images, optionally with fixed masks."""

    def __init__(self, images: Sequence[np.ndarray],
                 masks: Sequence[np.ndarray] | None = None, augment: bool = True):
        if not images:
            raise ValidationError("dataset needs at least one image")
        self.images = []
        for img in images:
            validate_image(img)
            self.images.append(img.astype(np.float32, copy=False))
        self.masks = None
        if masks is not None:
            if len(masks) != len(images):
                raise ValidationError("masks and images counts differ")
            self.masks = []
            for mask, img in zip(masks, self.images):
                validate_mask(mask)
                if mask.shape != img.shape:
                    raise ValidationError("fixed mask shape differs from image")
                self.masks.append(mask.astype(np.float32, copy=False))
        self.augment = augment

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray | None]:
        idx = int(rng.integers(0, len(self.images)))
        image = self.images[idx]
        mask = self.masks[idx] if self.masks is not None else None
        if self.augment:
            image = train_preprocess(image, rng, size)
        elif image.shape != (size, size):
            raise ValidationError(
                f"augmentation disabled but image is {image.shape}, not {size}x{size}"
            )
        return image, mask


class ManifestDataset:
    """Lazy-loading source backed by a dataset manifest."""

    def __init__(self, manifest, augment: bool = True, cache: bool = True):
        if manifest.count == 0:
            raise ValidationError("manifest lists no images")
        self.entries = manifest.entries
        self.augment = augment
        self._cache: dict[int, np.ndarray] = {} if cache else None

    def _load(self, idx: int) -> np.ndarray:
        if self._cache is not None and idx in self._cache:
            return self._cache[idx]
        image = load_tir_image(self.entries[idx][0])
        if self._cache is not None:
            self._cache[idx] = image
        return image

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray | None]:
        idx = int(rng.integers(0, len(self.entries)))
        image = self._load(idx)
        if self.augment:
            image = train_preprocess(image, rng, size)
        return image, None


class BatchSource:
    """Deterministic batch stream: images, sampled masks, canny edge maps.

    Mask buckets are drawn uniformly over the six evaluation ranges unless
    the dataset supplies fixed masks.
    """

    def __init__(self, dataset, config: TrainConfig):
        self.dataset = dataset
        self.batch_size = config.batch_size
        self.size = config.train_size
        self.canny_low = config.canny_low
        self.canny_high = config.canny_high
        self.mask_input_edges = config.mask_input_edges
        self.rng = np.random.default_rng(config.seed)

    def _sample_mask(self, shape: tuple[int, int]) -> np.ndarray:
        bucket = TABLE_BUCKETS[int(self.rng.integers(0, len(TABLE_BUCKETS)))]
        return generate_stroke_mask(self.rng, bucket, shape[0])

    def next_batch(self) -> dict[str, torch.Tensor]:
        images, masks, edges_gt, edges_in = [], [], [], []
        for _ in range(self.batch_size):
            image, mask = self.dataset.sample(self.rng, self.size)
            if mask is None:
                mask = self._sample_mask(image.shape)
            image_in = image * mask
            edge_gt = edge_ops.canny(image, self.canny_low, self.canny_high)
            edge_in = edge_ops.canny(image_in, self.canny_low, self.canny_high)
            if self.mask_input_edges:
                edge_in = edge_in * mask
            images.append(image)
            masks.append(mask)
            edges_gt.append(edge_gt)
            edges_in.append(edge_in)

        def stack(arrs: list[np.ndarray]) -> torch.Tensor:
            return torch.from_numpy(np.stack(arrs).astype(np.float32))[:, None]

        image_t = stack(images)
        mask_t = stack(masks)
        return {
            "image_gt": image_t,
            "mask": mask_t,
            "image_in": image_t * mask_t,
            "edge_gt": stack(edges_gt),
            "edge_in": stack(edges_in),
        }

    def state(self) -> dict[str, Any]:
        return {"numpy": self.rng.bit_generator.state}

    def load_state(self, state: dict[str, Any]) -> None:
        self.rng.bit_generator.state = state["numpy"]


class _ConstantBatch:
    """Replays one precomputed batch forever (single-image overfitting)."""

    def __init__(self, batch: dict[str, torch.Tensor]):
        self.batch = batch

    def next_batch(self) -> dict[str, torch.Tensor]:
        return self.batch

    def state(self) -> dict[str, Any]:
        return {}

    def load_state(self, state: dict[str, Any]) -> None:
        pass


def build_extractor(config: TrainConfig) -> FeatureExtractor | None:
    if config.feature_extractor == "none":
        if config.w_perc != 0.0 or config.w_style != 0.0:
            raise ConfigurationError(
                "feature_extractor=none requires w_perc and w_style to be 0"
            )
        return None
    if config.feature_extractor == "random":
        return FeatureExtractor.random(config.extractor_seed)
    if config.feature_extractor == "pretrained":
        return FeatureExtractor.pretrained()
    return FeatureExtractor.default(config.extractor_seed)


def _torch_rng_b64() -> str:
    return base64.b64encode(torch.get_rng_state().numpy().tobytes()).decode("ascii")


def _set_torch_rng_b64(encoded: str) -> None:
    raw = np.frombuffer(base64.b64decode(encoded), dtype=np.uint8)
    torch.set_rng_state(torch.from_numpy(raw.copy()))


def _named_trainable(module: torch.nn.Module, prefix: str) -> dict[str, torch.Tensor]:
    return {f"{prefix}.{n}": p for n, p in module.named_parameters() if p.requires_grad}


def _freeze(module: torch.nn.Module) -> None:
    for p in module.parameters():
        p.requires_grad_(False)
    module.eval()


def _check_finite(value: torch.Tensor, stage: str, step: int, last_good: Path | None) -> None:
    if not torch.isfinite(value).all():
        where = f"; last good checkpoint: {last_good}" if last_good else ""
        raise TrainingError(f"{stage} stage diverged at step {step} (non-finite loss){where}")


class _LossLog:
    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(path, "a", encoding="utf-8")

    def write(self, stage: str, step: int, losses: dict[str, float]) -> None:
        record = {"stage": stage, "step": step, "losses": losses}
        self.fh.write(json.dumps(record, sort_keys=True) + "\n")
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def _stage_setup(config: TrainConfig) -> None:
    torch.manual_seed(config.seed)
    if config.deterministic:
        try:
            torch.use_deterministic_algorithms(True, warn_only=True)
        except TypeError:
            torch.use_deterministic_algorithms(True)


def _save_stage_checkpoint(path: Path, bundle: ModelBundle, stage: str, step: int,
                           config: TrainConfig, source,
                           optimizers: dict[str, Adam]) -> Path:
    extra_arrays: dict[str, np.ndarray] = {}
    for name, opt in optimizers.items():
        extra_arrays.update(opt.state_arrays(f"optim/{name}"))
    extra_header = {
        "data_rng": source.state(),
        "torch_rng": _torch_rng_b64(),
        "seed": config.seed,
    }
    return save_bundle(
        path, bundle, stage=stage, step=step,
        train_config=config.header_dict(),
        extra_arrays=extra_arrays, extra_header=extra_header,
    )


def _resume(resume_from: str | Path, stage: str, bundle: ModelBundle,
            optimizers: dict[str, Adam], source) -> int:
    from .checkpoint import load_bundle_arrays

    header, arrays = load_checkpoint(resume_from)
    if header.get("stage") != stage:
        raise ValidationError(
            f"checkpoint stage {header.get('stage')!r} does not match {stage!r}"
        )
    load_bundle_arrays(bundle, arrays)
    for name, opt in optimizers.items():
        opt.load_state_arrays(f"optim/{name}", arrays)
    source.load_state(header["data_rng"])
    _set_torch_rng_b64(header["torch_rng"])
    return int(header["step"])


def _load_stage_bundle(path: str | Path, expected_stage: str) -> ModelBundle:
    from .checkpoint import load_bundle

    bundle, header, _ = load_bundle(path)
    if header.get("stage") != expected_stage:
        raise ValidationError(
            f"expected a {expected_stage!r} checkpoint, got {header.get('stage')!r}: {path}"
        )
    return bundle


def _run_stage(stage: str, config: TrainConfig, source, bundle: ModelBundle,
               optimizers: dict[str, Adam], step_fn, steps: int,
               resume_from: str | Path | None) -> Path:
    ckpt_dir = Path(config.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log = _LossLog(ckpt_dir / "losses.ndjson")
    start = 0
    if resume_from is not None:
        start = _resume(resume_from, stage, bundle, optimizers, source)
    last_good: Path | None = Path(resume_from) if resume_from else None
    try:
        for step in range(start + 1, steps + 1):
            batch = source.next_batch()
            losses = step_fn(batch)
            for value in losses.values():
                _check_finite(torch.as_tensor(value), stage, step, last_good)
            log.write(stage, step, {k: float(v) for k, v in losses.items()})
            if config.checkpoint_every > 0 and step % config.checkpoint_every == 0 and step < steps:
                last_good = _save_stage_checkpoint(
                    ckpt_dir / f"{stage}_{step:06d}.ckpt", bundle, stage, step,
                    config, source, optimizers,
                )
        final = _save_stage_checkpoint(
            ckpt_dir / f"{stage}_final.ckpt", bundle, stage, max(steps, start),
            config, source, optimizers,
        )
    finally:
        log.close()
    return final


def train_edge_stage(config: TrainConfig, data,
                     resume_from: str | Path | None = None) -> Path:
    """Adversarial training of the edge generator against its discriminator."""
    _stage_setup(config)
    bundle = build_models(config.network_config(), config.seed)
    source = data if hasattr(data, "next_batch") else BatchSource(data, config)
    gen = bundle.edge_generator
    disc = bundle.disc_edge
    opt_g = Adam(_named_trainable(gen, "edge_generator"), config.lr_edge,
                 config.adam_beta1, config.adam_beta2, config.adam_eps)
    opt_d = Adam(_named_trainable(disc, "disc_edge"), config.lr_edge,
                 config.adam_beta1, config.adam_beta2, config.adam_eps)

    def step_fn(batch: dict[str, torch.Tensor]) -> dict[str, float]:
        edge_pred = gen(batch["mask"], batch["image_in"], batch["edge_in"])

        opt_d.zero_grad()
        d_loss = hinge_discriminator_loss(disc(batch["edge_gt"]), disc(edge_pred.detach()))
        d_loss.backward()
        opt_d.step()

        opt_g.zero_grad()
        adv = hinge_generator_loss(disc(edge_pred))
        g_loss = adv
        extras: dict[str, float] = {}
        if config.edge_l1_weight != 0.0:
            l1 = config.edge_l1_weight * (edge_pred - batch["edge_gt"]).abs().mean()
            g_loss = g_loss + l1
            extras["edge_l1"] = float(l1.detach())
        g_loss.backward()
        opt_g.step()
        return {"d": float(d_loss.detach()), "adversarial": float(adv.detach()),
                "g_total": float(g_loss.detach()), **extras}

    return _run_stage("edge", config, source, bundle,
                      {"edge_g": opt_g, "edge_d": opt_d},
                      step_fn, config.steps_edge, resume_from)


def train_completion_stage(config: TrainConfig, data, edge_ckpt: str | Path,
                           resume_from: str | Path | None = None) -> Path:
    """Reconstruction training of the completion net; edge generator frozen."""
    _stage_setup(config)
    bundle = _load_stage_bundle(edge_ckpt, "edge")
    source = data if hasattr(data, "next_batch") else BatchSource(data, config)
    extractor = build_extractor(config)
    _freeze(bundle.edge_generator)
    gen = bundle.completion
    opt_g = Adam(_named_trainable(gen, "completion"), config.lr_completion,
                 config.adam_beta1, config.adam_beta2, config.adam_eps)
    weights = (config.w_l1, config.w_perc, config.w_style)

    def step_fn(batch: dict[str, torch.Tensor]) -> dict[str, float]:
        with torch.no_grad():
            edge_prob = bundle.edge_generator(batch["mask"], batch["image_in"], batch["edge_in"])
            edge_pred = (edge_prob >= edge_ops.BINARIZE_THRESHOLD).to(edge_prob.dtype)
            edge_rec = batch["edge_in"] + edge_pred * (1.0 - batch["mask"])
        coarse = gen(batch["mask"], batch["image_in"], edge_rec)
        opt_g.zero_grad()
        report = stage_loss_completion(coarse, batch["image_gt"], extractor, weights)
        report.total.backward()
        opt_g.step()
        return report.scalars()

    return _run_stage("completion", config, source, bundle, {"completion_g": opt_g},
                      step_fn, config.steps_completion, resume_from)


def train_refinement_stage(config: TrainConfig, data, edge_ckpt: str | Path,
                           completion_ckpt: str | Path,
                           resume_from: str | Path | None = None) -> Path:
    """Adversarial + reconstruction training of the refinement net.

    Upstream nets come from the completion checkpoint (which carries the
    trained edge generator through) and stay frozen; ``joint_finetune``
    unfreezes the completion net so gradients reach it through the coarse
    recomposition. The edge generator stays frozen either way because its
    output is binarized before use.
    """
    _stage_setup(config)
    if not Path(edge_ckpt).is_file():
        raise ValidationError(f"edge checkpoint not found: {edge_ckpt}")
    bundle = _load_stage_bundle(completion_ckpt, "completion")
    source = data if hasattr(data, "next_batch") else BatchSource(data, config)
    extractor = build_extractor(config)
    _freeze(bundle.edge_generator)
    if not config.joint_finetune:
        _freeze(bundle.completion)
    gen = bundle.refinement
    disc = bundle.disc_image
    gen_params = _named_trainable(gen, "refinement")
    if config.joint_finetune:
        gen_params.update(_named_trainable(bundle.completion, "completion"))
    opt_g = Adam(gen_params, config.lr_refinement,
                 config.adam_beta1, config.adam_beta2, config.adam_eps)
    opt_d = Adam(_named_trainable(disc, "disc_image"), config.lr_refinement,
                 config.adam_beta1, config.adam_beta2, config.adam_eps)
    weights = (config.w_l1, config.w_perc, config.w_style)

    def step_fn(batch: dict[str, torch.Tensor]) -> dict[str, float]:
        with torch.no_grad():
            edge_prob = bundle.edge_generator(batch["mask"], batch["image_in"], batch["edge_in"])
            edge_pred = (edge_prob >= edge_ops.BINARIZE_THRESHOLD).to(edge_prob.dtype)
            edge_rec = batch["edge_in"] + edge_pred * (1.0 - batch["mask"])
        hold = torch.enable_grad() if config.joint_finetune else torch.no_grad()
        with hold:
            coarse = bundle.completion(batch["mask"], batch["image_in"], edge_rec)
            coarse_rec = batch["image_in"] + coarse * (1.0 - batch["mask"])
        refined = gen(batch["mask"], coarse_rec)

        opt_d.zero_grad()
        d_loss = hinge_discriminator_loss(disc(batch["image_gt"]), disc(refined.detach()))
        d_loss.backward()
        opt_d.step()

        opt_g.zero_grad()
        report = stage_loss_refinement(refined, batch["image_gt"], disc(refined),
                                       extractor, config.w_adv, weights)
        report.total.backward()
        opt_g.step()
        out = report.scalars()
        out["d"] = float(d_loss.detach())
        return out

    return _run_stage("refinement", config, source, bundle,
                      {"refinement_g": opt_g, "refinement_d": opt_d},
                      step_fn, config.steps_refinement, resume_from)


def _hole_psnr(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    hole = mask == 0.0
    if not hole.any():
        raise ValidationError("mask has no hole pixels")
    mse = float(np.mean((pred[hole].astype(np.float64) - gt[hole].astype(np.float64)) ** 2))
    if mse <= 0.0:
        return 100.0
    return min(100.0, 10.0 * math.log10(1.0 / mse))


def make_fixed_batch(image: np.ndarray, mask: np.ndarray,
                     config: TrainConfig) -> dict[str, torch.Tensor]:
    """One-sample constant batch with precomputed edge maps."""
    validate_image(image)
    validate_mask(mask)
    if image.shape != mask.shape:
        raise ValidationError("image and mask shapes differ")
    image_in = image * mask
    edge_gt = edge_ops.canny(image, config.canny_low, config.canny_high)
    edge_in = edge_ops.canny(image_in, config.canny_low, config.canny_high)
    if config.mask_input_edges:
        edge_in = edge_in * mask

    def one(arr: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(arr.astype(np.float32))[None, None]

    return {
        "image_gt": one(image),
        "mask": one(mask),
        "image_in": one(image_in),
        "edge_gt": one(edge_gt),
        "edge_in": one(edge_in),
    }


def overfit_single_image(config: TrainConfig, image: np.ndarray,
                         mask: np.ndarray | None = None) -> float:
    """Capability probe: train all stages on one image with one fixed mask and
    return the hole-region PSNR of the final recomposed output.

    With every stage's step count at zero the probe skips training and returns
    the PSNR of the masked input itself, the documented baseline.
    """
    validate_image(image)
    if mask is None:
        rng = np.random.default_rng(config.seed)
        mask = generate_stroke_mask(rng, MaskBucket(0.2, 0.3), image.shape[0])
    if not (mask == 0.0).any():
        raise ValidationError("overfit mask has no hole")

    if config.steps_edge + config.steps_completion + config.steps_refinement == 0:
        return _hole_psnr(image * mask, image, mask)

    source = _ConstantBatch(make_fixed_batch(image, mask, config))
    edge_ckpt = train_edge_stage(config, source)
    completion_ckpt = train_completion_stage(config, source, edge_ckpt)
    refinement_ckpt = train_refinement_stage(config, source, edge_ckpt, completion_ckpt)

    pipe = InpaintPipeline.from_checkpoint(refinement_ckpt)
    out = pipe.inpaint(image, mask)
    return _hole_psnr(out.result, image, mask)

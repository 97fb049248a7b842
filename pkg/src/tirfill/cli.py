"""Command-line entry point: train, eval, infer, edges, serve.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime failure.
Config files are flat key=value text; explicit flags win over file values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import edge_ops
from .data_pipeline import (
    TABLE_BUCKETS,
    generate_stroke_mask,
    load_manifest,
    load_mask,
    load_tir_image,
    test_preprocess,
)
from .errors import (
    ConfigurationError,
    MaskGenerationError,
    NumericalError,
    TrainingError,
    ValidationError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tirfill", description="Thermal-infrared image inpainting")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one or all training stages")
    train.add_argument("--config", help="key=value config file")
    train.add_argument("--data", required=True, help="training manifest path")
    train.add_argument("--stage", default="all",
                       choices=["all", "edge", "completion", "refinement"])
    train.add_argument("--steps", type=int, help="step count for the selected stage(s)")
    train.add_argument("--seed", type=int)
    train.add_argument("--batch-size", type=int, dest="batch_size")
    train.add_argument("--size", type=int, dest="train_size")
    train.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    train.add_argument("--no-eag", action="store_true", help="disable edge-aware normalization")
    train.add_argument("--no-gated", action="store_true", help="plain convs in the refiner")
    train.add_argument("--edge-ckpt", help="edge checkpoint for downstream stages")
    train.add_argument("--completion-ckpt", help="completion checkpoint for refinement")
    train.add_argument("--resume", help="resume the selected stage from this checkpoint")
    train.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")

    ev = sub.add_parser("eval", help="bucketed metric report on a manifest")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--masks", help="directory of mask PNGs named like the images")
    ev.add_argument("--seed", type=int, default=0, help="seed for generated masks")
    ev.add_argument("--out", default="report", help="output prefix (.json/.txt)")
    ev.add_argument("--limit", type=int, help="evaluate at most N images")
    ev.add_argument("--hole-only", action="store_true")
    ev.add_argument("--raw-output", action="store_true",
                    help="score the raw refinement output instead of the recomposed image")
    ev.add_argument("--lpips", default="random", choices=["random", "pretrained", "off"])
    ev.add_argument("--fid", default="random", choices=["random", "off"])

    infer = sub.add_parser("infer", help="inpaint one image")
    infer.add_argument("--checkpoint", required=True)
    infer.add_argument("--image", required=True)
    infer.add_argument("--mask", required=True)
    infer.add_argument("--out", required=True)
    infer.add_argument("--debug", action="store_true",
                       help="also write the edge and coarse intermediates")

    edges = sub.add_parser("edges", help="write the canny edge map of an image")
    edges.add_argument("--image", required=True)
    edges.add_argument("--out", required=True)
    edges.add_argument("--low", type=float, default=edge_ops.DEFAULT_LOW_THRESHOLD)
    edges.add_argument("--high", type=float, default=edge_ops.DEFAULT_HIGH_THRESHOLD)

    serve = sub.add_parser("serve", help="run the HTTP inference service")
    serve.add_argument("--checkpoint", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8600)
    serve.add_argument("--static", help="directory of UI files to serve at /")
    serve.add_argument("--cors", action="store_true")
    serve.add_argument("--max-payload", type=int, dest="max_payload")

    return parser


def _train_config(args) -> "TrainConfig":
    from .training import TrainConfig, parse_kv_file

    mapping: dict[str, str] = {}
    if args.config:
        if not Path(args.config).is_file():
            raise _UsageError(f"config file not found: {args.config}")
        mapping.update(parse_kv_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise _UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    if args.seed is not None:
        mapping["seed"] = str(args.seed)
    if args.batch_size is not None:
        mapping["batch_size"] = str(args.batch_size)
    if args.train_size is not None:
        mapping["train_size"] = str(args.train_size)
    if args.checkpoint_dir is not None:
        mapping["checkpoint_dir"] = args.checkpoint_dir
    if args.no_eag:
        mapping["eag_enabled"] = "false"
    if args.no_gated:
        mapping["gated_enabled"] = "false"
    if args.steps is not None:
        stages = ["edge", "completion", "refinement"] if args.stage == "all" else [args.stage]
        for stage in stages:
            mapping[f"steps_{stage}"] = str(args.steps)
    return TrainConfig.from_mapping(mapping)


def _require_ckpt(explicit: str | None, default: Path, what: str) -> Path:
    path = Path(explicit) if explicit else default
    if not path.is_file():
        raise _UsageError(f"missing upstream checkpoint ({what}): {path}")
    return path


def cmd_train(args) -> int:
    from .training import (
        ManifestDataset,
        train_completion_stage,
        train_edge_stage,
        train_refinement_stage,
    )

    config = _train_config(args)
    dataset = ManifestDataset(load_manifest(args.data, split="train"))
    ckpt_dir = Path(config.checkpoint_dir)
    resume = args.resume

    if args.stage in ("all", "edge"):
        edge_ckpt = train_edge_stage(config, dataset,
                                     resume_from=resume if args.stage == "edge" else None)
        print(f"edge stage checkpoint: {edge_ckpt}")
    if args.stage in ("all", "completion"):
        if args.stage == "completion":
            edge_ckpt = _require_ckpt(args.edge_ckpt, ckpt_dir / "edge_final.ckpt", "edge")
        completion_ckpt = train_completion_stage(
            config, dataset, edge_ckpt,
            resume_from=resume if args.stage == "completion" else None)
        print(f"completion stage checkpoint: {completion_ckpt}")
    if args.stage in ("all", "refinement"):
        if args.stage == "refinement":
            edge_ckpt = _require_ckpt(args.edge_ckpt, ckpt_dir / "edge_final.ckpt", "edge")
            completion_ckpt = _require_ckpt(
                args.completion_ckpt, ckpt_dir / "completion_final.ckpt", "completion")
        refinement_ckpt = train_refinement_stage(
            config, dataset, edge_ckpt, completion_ckpt,
            resume_from=resume if args.stage == "refinement" else None)
        print(f"refinement stage checkpoint: {refinement_ckpt}")
    return 0


def _eval_pairs(args):
    manifest = load_manifest(args.manifest, split="eval")
    entries = manifest.entries[: args.limit] if args.limit else manifest.entries
    rng = np.random.default_rng(args.seed)
    for index, (image_path, mask_path) in enumerate(entries):
        image = test_preprocess(load_tir_image(image_path))
        if mask_path is not None:
            mask = load_mask(mask_path, image.shape)
        elif args.masks:
            candidate = Path(args.masks) / (Path(image_path).stem + ".png")
            if not candidate.is_file():
                raise _UsageError(f"mask not found for {image_path}: {candidate}")
            mask = load_mask(candidate, image.shape)
        else:
            bucket = TABLE_BUCKETS[index % len(TABLE_BUCKETS)]
            mask = generate_stroke_mask(rng, bucket, image.shape[0])
        yield image, mask


def cmd_eval(args) -> int:
    from .losses import FeatureExtractor
    from .metrics import RandomFeatureEmbedder, evaluate, random_lpips_weights
    from .pipeline import InpaintPipeline

    pipe = InpaintPipeline.from_checkpoint(args.checkpoint)
    extractor = None
    weights = None
    if args.lpips == "random":
        extractor = FeatureExtractor.random(0)
        weights = random_lpips_weights(0)
    elif args.lpips == "pretrained":
        extractor = FeatureExtractor.pretrained()
        weights = random_lpips_weights(0)
    embedder = RandomFeatureEmbedder(seed=0) if args.fid == "random" else None

    if args.raw_output:
        infer_fn = lambda image, mask: pipe.inpaint(image, mask, return_debug=True).raw
    else:
        infer_fn = lambda image, mask: pipe.inpaint(image, mask).result
    report = evaluate(
        infer_fn,
        _eval_pairs(args),
        extractor=extractor, lpips_weights=weights, embedder=embedder,
        hole_only=args.hole_only,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    json_path = out.with_suffix(".json")
    txt_path = out.with_suffix(".txt")
    json_path.write_text(report.to_json() + "\n", encoding="utf-8")
    txt_path.write_text(report.to_text_table(), encoding="utf-8")
    sys.stdout.write(report.to_text_table())
    print(f"report written: {json_path}, {txt_path}")
    return 0


def _write_image_png(path: Path, arr: np.ndarray) -> None:
    data = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def cmd_infer(args) -> int:
    from .pipeline import InpaintPipeline

    pipe = InpaintPipeline.from_checkpoint(args.checkpoint)
    image = load_tir_image(args.image)
    mask = load_mask(args.mask, image.shape)
    result = pipe.inpaint(image, mask, return_debug=args.debug)
    if result.padded:
        print("warning: input size not divisible by 4; reflect-padded and cropped back",
              file=sys.stderr)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_image_png(out, result.result)
    if args.debug:
        edge_ops.write_edge_png(result.edge, out.with_name(out.stem + "_edge.png"))
        _write_image_png(out.with_name(out.stem + "_coarse.png"), result.coarse)
    print(f"inpainted image written: {out}")
    return 0


def cmd_edges(args) -> int:
    image = load_tir_image(args.image)
    edge = edge_ops.canny(image, args.low, args.high)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    edge_ops.write_edge_png(edge, out)
    print(f"edge map written: {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    kwargs = {}
    if args.max_payload is not None:
        kwargs["max_payload_bytes"] = args.max_payload
    app = create_app(args.checkpoint, static_dir=args.static,
                     allow_cors=args.cors, **kwargs)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "edges": cmd_edges,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (_UsageError, ConfigurationError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingError, NumericalError, MaskGenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

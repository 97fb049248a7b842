"""Self-describing checkpoint archive.

Layout: magic string, 8-byte little-endian header length, JSON header, then
the concatenated float32 little-endian parameter blob. The header maps each
parameter name to shape/offset and carries arbitrary metadata (config, stage,
step, rng state). Parameter names are written sorted, so two checkpoints of
identical state are byte-identical files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .errors import ValidationError

MAGIC = b"TIRFILL-CKPT-1\n"
FORMAT_NAME = "TIRFILL-CKPT-1"


def save_checkpoint(path: str | Path, header: dict[str, Any],
                    arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    names = sorted(arrays)
    params: dict[str, dict[str, Any]] = {}
    blobs: list[bytes] = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        raw = arr.tobytes()
        params[name] = {"shape": list(arr.shape), "dtype": "float32",
                        "offset": offset, "nbytes": len(raw)}
        blobs.append(raw)
        offset += len(raw)
    full_header = dict(header)
    full_header["format"] = FORMAT_NAME
    full_header["params"] = params
    encoded = json.dumps(full_header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(encoded)))
        fh.write(encoded)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValidationError(f"not a {FORMAT_NAME} file: {path}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        blob = fh.read()
    arrays: dict[str, np.ndarray] = {}
    for name, meta in header.get("params", {}).items():
        start, nbytes = meta["offset"], meta["nbytes"]
        arr = np.frombuffer(blob[start:start + nbytes], dtype="<f4")
        arrays[name] = arr.reshape(meta["shape"]).copy()
    return header, arrays


def checkpoint_id(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def bundle_arrays(bundle: "ModelBundle") -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for mod_name, module in bundle.modules_by_name().items():
        for key, tensor in module.state_dict().items():
            out[f"model/{mod_name}/{key}"] = tensor.detach().cpu().numpy().astype(np.float32)
    return out


def load_bundle_arrays(bundle: "ModelBundle", arrays: dict[str, np.ndarray]) -> None:
    for mod_name, module in bundle.modules_by_name().items():
        prefix = f"model/{mod_name}/"
        state = {}
        for name, arr in arrays.items():
            if name.startswith(prefix):
                state[name[len(prefix):]] = torch.from_numpy(np.array(arr, dtype=np.float32))
        module.load_state_dict(state, strict=True)


def save_bundle(path: str | Path, bundle: "ModelBundle", *, stage: str, step: int,
                train_config: dict[str, Any] | None = None,
                extra_arrays: dict[str, np.ndarray] | None = None,
                extra_header: dict[str, Any] | None = None) -> Path:
    header: dict[str, Any] = {
        "stage": stage,
        "step": step,
        "network_config": dataclasses.asdict(bundle.config),
    }
    if train_config is not None:
        header["train_config"] = train_config
    if extra_header:
        header.update(extra_header)
    arrays = bundle_arrays(bundle)
    if extra_arrays:
        arrays.update(extra_arrays)
    save_checkpoint(path, header, arrays)
    return Path(path)


def load_bundle(path: str | Path) -> tuple["ModelBundle", dict[str, Any], dict[str, np.ndarray]]:
    from .networks import NetworkConfig, build_models

    header, arrays = load_checkpoint(path)
    net_cfg = header.get("network_config")
    if net_cfg is None:
        raise ValidationError(f"checkpoint missing network_config header: {path}")
    bundle = build_models(NetworkConfig(**net_cfg), seed=0)
    load_bundle_arrays(bundle, arrays)
    return bundle, header, arrays

"""HTTP inference service: /v1/inpaint and /v1/health.

Requests carry base64 PNG payloads in JSON. Responses are deterministic for
identical inputs; the model snapshot is read-only, so concurrent requests
share it safely. Payload size is checked on the raw body before any decode
work, and oversized images are rejected by pixel count after the header
parse.
"""

from __future__ import annotations

import base64
import binascii
import io
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image

from . import __version__
from .data_pipeline import _to_unit_gray
from .errors import ValidationError
from .pipeline import InpaintPipeline

MAX_PAYLOAD_BYTES = 16 * 1024 * 1024
MAX_PIXELS = 4096 * 4096


class _BadRequest(Exception):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def _decode_png_field(payload: dict[str, Any], field: str) -> Image.Image:
    raw = payload.get(field)
    if not isinstance(raw, str) or not raw:
        raise _BadRequest(f"{field} must be a base64 PNG string", field)
    try:
        blob = base64.b64decode(raw, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise _BadRequest(f"{field} is not valid base64: {exc}", field) from exc
    try:
        img = Image.open(io.BytesIO(blob))
        img.load()
    except Exception as exc:
        raise _BadRequest(f"{field} is not a decodable image: {exc}", field) from exc
    return img


def _encode_png(arr: np.ndarray) -> str:
    data = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(checkpoint_path: str | Path | None = None, *,
               pipeline: InpaintPipeline | None = None,
               max_payload_bytes: int = MAX_PAYLOAD_BYTES,
               max_pixels: int = MAX_PIXELS,
               static_dir: str | Path | None = None,
               allow_cors: bool = False) -> FastAPI:
    """Build the service app. The checkpoint loads eagerly; pass a prebuilt
    ``pipeline`` instead to serve an in-memory model."""
    app = FastAPI(title="tirfill inference service", version=__version__)
    if pipeline is None and checkpoint_path is not None:
        pipeline = InpaintPipeline.from_checkpoint(checkpoint_path)

    if allow_cors:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware, allow_origins=["*"],
            allow_methods=["*"], allow_headers=["*"],
        )

    @app.get("/v1/health")
    async def health():
        if pipeline is None:
            return JSONResponse({"status": "unloaded"}, status_code=503)
        return {
            "status": "ok",
            "checkpoint": {
                "id": pipeline.checkpoint_sha256,
                "path": str(pipeline.checkpoint_path) if pipeline.checkpoint_path else None,
            },
            "config": pipeline.config_summary(),
        }

    @app.post("/v1/inpaint")
    async def inpaint(request: Request):
        if pipeline is None:
            return JSONResponse({"error": "model not loaded"}, status_code=503)
        body = await request.body()
        if len(body) > max_payload_bytes:
            return JSONResponse(
                {"error": f"payload {len(body)} bytes exceeds limit {max_payload_bytes}"},
                status_code=413,
            )
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(payload, dict):
            return JSONResponse({"error": "body must be a JSON object"}, status_code=400)

        try:
            image_img = _decode_png_field(payload, "image")
            mask_img = _decode_png_field(payload, "mask")
        except _BadRequest as exc:
            return JSONResponse({"error": str(exc), "field": exc.field}, status_code=400)

        if image_img.size[0] * image_img.size[1] > max_pixels:
            return JSONResponse(
                {"error": f"image has {image_img.size[0] * image_img.size[1]} pixels, "
                          f"limit {max_pixels}", "field": "image"},
                status_code=413,
            )
        if image_img.size != mask_img.size:
            return JSONResponse(
                {"error": f"mask size {mask_img.size} does not match image size "
                          f"{image_img.size}", "field": "mask"},
                status_code=400,
            )

        image = _to_unit_gray(image_img)
        mask_gray = np.asarray(mask_img.convert("L"), dtype=np.float32) / 255.0
        mask = (mask_gray >= 0.5).astype(np.float32)
        options = payload.get("options") or {}
        return_debug = bool(options.get("return_debug", False))

        try:
            result = pipeline.inpaint(image, mask, return_debug=return_debug)
        except ValidationError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)

        response: dict[str, Any] = {
            "result": _encode_png(result.result),
            "timings_ms": result.timings_ms,
        }
        if return_debug:
            response["debug"] = {
                "edge": _encode_png(result.edge),
                "coarse": _encode_png(result.coarse),
            }
        return response

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app

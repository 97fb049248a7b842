// Page wiring: one EditorController bound to file picker, brush controls,
// canvas painting, submit/result panel, mask export, and the error banner.

import { InpaintClient } from "./api.js";
import { EditorController, SourceImage } from "./editorState.js";
import { Point } from "./maskModel.js";

const client = new InpaintClient("");
const editor = new EditorController(client);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const statusLine = el<HTMLSpanElement>("status-line");
const fileInput = el<HTMLInputElement>("file-input");
const radiusInput = el<HTMLInputElement>("brush-radius");
const radiusValue = el<HTMLSpanElement>("brush-radius-value");
const modePaint = el<HTMLButtonElement>("mode-paint");
const modeErase = el<HTMLButtonElement>("mode-erase");
const undoButton = el<HTMLButtonElement>("undo");
const redoButton = el<HTMLButtonElement>("redo");
const ratioLine = el<HTMLSpanElement>("ratio-line");
const submitButton = el<HTMLButtonElement>("submit");
const exportButton = el<HTMLButtonElement>("export-mask");
const adoptButton = el<HTMLButtonElement>("adopt-result");
const banner = el<HTMLDivElement>("banner");
const bannerText = el<HTMLSpanElement>("banner-text");
const bannerDismiss = el<HTMLButtonElement>("banner-dismiss");
const imageCanvas = el<HTMLCanvasElement>("image-canvas");
const overlayCanvas = el<HTMLCanvasElement>("overlay-canvas");
const resultImage = el<HTMLImageElement>("result-image");
const resultPanel = el<HTMLDivElement>("result-panel");

let sourceBitmap: ImageBitmap | null = null;
let strokePoints: Point[] = [];
let painting = false;

function pngBlob(bytes: Uint8Array): Blob {
  const copy = new Uint8Array(bytes);
  return new Blob([copy.buffer], { type: "image/png" });
}

function redrawImage(): void {
  const ctx = imageCanvas.getContext("2d");
  if (!ctx || !sourceBitmap) return;
  ctx.clearRect(0, 0, imageCanvas.width, imageCanvas.height);
  ctx.drawImage(sourceBitmap, 0, 0);
}

function redrawOverlay(): void {
  const ctx = overlayCanvas.getContext("2d");
  if (!ctx || !editor.mask) return;
  const { width, height, data } = editor.mask;
  const image = ctx.createImageData(width, height);
  for (let i = 0; i < data.length; i++) {
    if (data[i] === 0) {
      image.data[i * 4] = 255;
      image.data[i * 4 + 1] = 48;
      image.data[i * 4 + 2] = 48;
      image.data[i * 4 + 3] = 130;
    }
  }
  ctx.clearRect(0, 0, width, height);
  ctx.putImageData(image, 0, 0);
}

function refreshControls(): void {
  ratioLine.textContent = editor.ratioLabel();
  const reason = editor.submitDisabledReason();
  submitButton.disabled = reason !== null;
  submitButton.title = reason ?? "send to the inpainting service";
  undoButton.disabled = !editor.history.canUndo();
  redoButton.disabled = !editor.history.canRedo();
  exportButton.disabled = editor.mask === null;
  adoptButton.disabled = !editor.canAdoptResult();
  resultPanel.hidden = editor.lastResult === null && resultImage.src === "";
  if (editor.banner) {
    bannerText.textContent = editor.banner;
    banner.hidden = false;
  } else {
    banner.hidden = true;
  }
  modePaint.classList.toggle("active", editor.brush.mode === "paint-hole");
  modeErase.classList.toggle("active", editor.brush.mode === "erase-hole");
}

async function loadFile(file: File): Promise<void> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  const bitmap = await createImageBitmap(pngBlob(bytes));
  sourceBitmap = bitmap;
  const image: SourceImage = { width: bitmap.width, height: bitmap.height, png: bytes };
  editor.loadImage(image);
  imageCanvas.width = bitmap.width;
  imageCanvas.height = bitmap.height;
  overlayCanvas.width = bitmap.width;
  overlayCanvas.height = bitmap.height;
  resultImage.src = "";
  redrawImage();
  redrawOverlay();
  refreshControls();
}

function canvasPoint(event: PointerEvent): Point {
  const rect = overlayCanvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * overlayCanvas.width,
    y: ((event.clientY - rect.top) / rect.height) * overlayCanvas.height,
  };
}

function previewSegment(points: Point[]): void {
  const ctx = overlayCanvas.getContext("2d");
  if (!ctx || points.length === 0) return;
  ctx.fillStyle = editor.brush.mode === "paint-hole" ? "rgba(255,48,48,0.5)" : "rgba(64,160,255,0.5)";
  for (const p of points) {
    ctx.beginPath();
    ctx.arc(p.x, p.y, editor.brush.radius, 0, Math.PI * 2);
    ctx.fill();
  }
}

overlayCanvas.addEventListener("pointerdown", (event) => {
  if (!editor.mask) return;
  painting = true;
  overlayCanvas.setPointerCapture(event.pointerId);
  strokePoints = [canvasPoint(event)];
  previewSegment(strokePoints);
});

overlayCanvas.addEventListener("pointermove", (event) => {
  if (!painting) return;
  const p = canvasPoint(event);
  strokePoints.push(p);
  previewSegment([p]);
});

function endStroke(): void {
  if (!painting) return;
  painting = false;
  if (strokePoints.length > 0) editor.paintStroke(strokePoints);
  strokePoints = [];
  redrawOverlay();
  refreshControls();
}

overlayCanvas.addEventListener("pointerup", endStroke);
overlayCanvas.addEventListener("pointercancel", endStroke);

fileInput.addEventListener("change", () => {
  const file = fileInput.files?.[0];
  if (file) {
    void loadFile(file).catch((err) => {
      editor.banner = `could not load image: ${err instanceof Error ? err.message : String(err)}`;
      refreshControls();
    });
  }
});

radiusInput.addEventListener("input", () => {
  editor.brush.radius = Number(radiusInput.value);
  radiusValue.textContent = `${radiusInput.value}px`;
});

modePaint.addEventListener("click", () => {
  editor.brush.mode = "paint-hole";
  refreshControls();
});

modeErase.addEventListener("click", () => {
  editor.brush.mode = "erase-hole";
  refreshControls();
});

undoButton.addEventListener("click", () => {
  if (editor.undo()) {
    void refreshAfterStateSwap();
  }
});

redoButton.addEventListener("click", () => {
  if (editor.redo()) {
    void refreshAfterStateSwap();
  }
});

// Undo can swap the source image (after "continue from result"), so both
// canvases are rebuilt from the controller state.
async function refreshAfterStateSwap(): Promise<void> {
  if (editor.source) {
    sourceBitmap = await createImageBitmap(pngBlob(editor.source.png));
    imageCanvas.width = editor.source.width;
    imageCanvas.height = editor.source.height;
    overlayCanvas.width = editor.source.width;
    overlayCanvas.height = editor.source.height;
    redrawImage();
  }
  redrawOverlay();
  refreshControls();
}

document.addEventListener("keydown", (event) => {
  if ((event.ctrlKey || event.metaKey) && event.key.toLowerCase() === "z") {
    event.preventDefault();
    if (event.shiftKey ? editor.redo() : editor.undo()) void refreshAfterStateSwap();
  }
});

submitButton.addEventListener("click", () => {
  refreshControls();
  void editor.submit().then((ok) => {
    if (ok && editor.lastResult) {
      resultImage.src = URL.createObjectURL(pngBlob(editor.lastResult));
      resultPanel.hidden = false;
    }
    refreshControls();
  });
  refreshControls();
});

adoptButton.addEventListener("click", () => {
  editor.adoptResult();
  void refreshAfterStateSwap();
});

exportButton.addEventListener("click", () => {
  const { filename, png } = editor.exportMask();
  const link = document.createElement("a");
  link.href = URL.createObjectURL(pngBlob(png));
  link.download = filename;
  link.click();
  URL.revokeObjectURL(link.href);
});

bannerDismiss.addEventListener("click", () => {
  editor.dismissBanner();
  refreshControls();
});

void client
  .health()
  .then((info) => {
    if (info.status === "ok" && info.checkpoint) {
      statusLine.textContent = `service ready (checkpoint ${info.checkpoint.id.slice(0, 12)})`;
    } else {
      statusLine.textContent = `service ${info.status}`;
    }
  })
  .catch(() => {
    statusLine.textContent = "service unreachable";
  });

refreshControls();

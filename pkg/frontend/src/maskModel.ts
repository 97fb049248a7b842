// Editor-side binary mask: 1 = keep, 0 = fill. Dimensions always match the
// loaded image; strokes are clipped to the canvas bounds.

import { encodeGrayPng } from "./png.js";

export type BrushMode = "paint-hole" | "erase-hole";

export interface Brush {
  radius: number;
  mode: BrushMode;
}

export interface Point {
  x: number;
  y: number;
}

export interface RatioBucket {
  lower: number;
  upper: number;
  label: string;
}

export const RATIO_BUCKETS: RatioBucket[] = [
  [0.01, 0.1],
  [0.1, 0.2],
  [0.2, 0.3],
  [0.3, 0.4],
  [0.4, 0.5],
  [0.5, 0.6],
].map(([lower, upper]) => ({
  lower,
  upper,
  label: `${Math.round(lower * 100)}-${Math.round(upper * 100)}%`,
}));

// Half-open [lower, upper) with the top edge closing the last bucket, the
// same assignment rule the evaluation harness uses.
export function bucketForRatio(ratio: number): RatioBucket | null {
  for (let i = 0; i < RATIO_BUCKETS.length; i++) {
    const b = RATIO_BUCKETS[i];
    const last = i === RATIO_BUCKETS.length - 1;
    if (ratio >= b.lower && (last ? ratio <= b.upper : ratio < b.upper)) return b;
  }
  return null;
}

export class MaskLayer {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, data?: Uint8Array) {
    if (width <= 0 || height <= 0) throw new Error(`invalid mask size ${width}x${height}`);
    this.width = width;
    this.height = height;
    if (data) {
      if (data.length !== width * height) {
        throw new Error(`mask buffer ${data.length} does not match ${width}x${height}`);
      }
      this.data = data;
    } else {
      this.data = new Uint8Array(width * height).fill(1);
    }
  }

  clone(): MaskLayer {
    return new MaskLayer(this.width, this.height, this.data.slice());
  }

  snapshot(): Uint8Array {
    return this.data.slice();
  }

  restore(bytes: Uint8Array): void {
    if (bytes.length !== this.data.length) throw new Error("snapshot size mismatch");
    this.data.set(bytes);
  }

  stampDisc(cx: number, cy: number, radius: number, value: 0 | 1): void {
    const r = Math.max(0, radius);
    const r2 = r * r;
    const x0 = Math.max(0, Math.floor(cx - r));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + r));
    const y0 = Math.max(0, Math.floor(cy - r));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + r));
    for (let y = y0; y <= y1; y++) {
      const dy = y - cy;
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        if (dx * dx + dy * dy <= r2) this.data[y * this.width + x] = value;
      }
    }
  }

  /** Rasterize a polyline as overlapping disc stamps; a single point stamps one disc. */
  paintStroke(points: Point[], brush: Brush): void {
    if (points.length === 0) return;
    const value: 0 | 1 = brush.mode === "paint-hole" ? 0 : 1;
    this.stampDisc(points[0].x, points[0].y, brush.radius, value);
    for (let i = 1; i < points.length; i++) {
      const a = points[i - 1];
      const b = points[i];
      const steps = Math.max(1, Math.ceil(Math.hypot(b.x - a.x, b.y - a.y)));
      for (let s = 1; s <= steps; s++) {
        const t = s / steps;
        this.stampDisc(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, brush.radius, value);
      }
    }
  }

  holeCount(): number {
    let n = 0;
    for (let i = 0; i < this.data.length; i++) {
      if (this.data[i] === 0) n++;
    }
    return n;
  }

  holeRatio(): number {
    return this.holeCount() / this.data.length;
  }

  /** 8-bit PNG, white = keep, black = fill. */
  toPng(): Uint8Array {
    const pixels = new Uint8Array(this.data.length);
    for (let i = 0; i < this.data.length; i++) pixels[i] = this.data[i] ? 255 : 0;
    return encodeGrayPng(this.width, this.height, pixels);
  }
}

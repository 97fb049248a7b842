// Editor state machine, kept free of DOM concerns so it can be driven by
// tests as well as by the page. The source image pixels are never modified;
// edits touch only the mask layer, and "continue from result" swaps in the
// returned PNG as a new source behind an undo entry.

import { InpaintClient, InpaintOutcome, ServiceError } from "./api.js";
import { Brush, bucketForRatio, MaskLayer, Point } from "./maskModel.js";
import { History } from "./history.js";

export interface SourceImage {
  width: number;
  height: number;
  png: Uint8Array;
}

interface Snapshot {
  source: SourceImage;
  mask: Uint8Array;
}

export class EditorController {
  source: SourceImage | null = null;
  mask: MaskLayer | null = null;
  brush: Brush = { radius: 12, mode: "paint-hole" };
  lastResult: Uint8Array | null = null;
  banner: string | null = null;
  pending = false;
  readonly history: History<Snapshot>;

  constructor(
    private readonly client: InpaintClient,
    historyCapacity: number = 50,
  ) {
    this.history = new History<Snapshot>(historyCapacity);
  }

  loadImage(image: SourceImage): void {
    this.source = image;
    this.mask = new MaskLayer(image.width, image.height);
    this.history.clear();
    this.lastResult = null;
    this.banner = null;
  }

  private snapshot(): Snapshot {
    if (!this.source || !this.mask) throw new Error("no image loaded");
    return { source: this.source, mask: this.mask.snapshot() };
  }

  private restore(snap: Snapshot): void {
    this.source = snap.source;
    this.mask = new MaskLayer(snap.source.width, snap.source.height, snap.mask.slice());
  }

  paintStroke(points: Point[]): void {
    if (!this.mask) throw new Error("no image loaded");
    if (points.length === 0) return;
    this.history.push(this.snapshot());
    this.mask.paintStroke(points, this.brush);
  }

  undo(): boolean {
    if (!this.source) return false;
    const prev = this.history.undo(this.snapshot());
    if (!prev) return false;
    this.restore(prev);
    return true;
  }

  redo(): boolean {
    if (!this.source) return false;
    const next = this.history.redo(this.snapshot());
    if (!next) return false;
    this.restore(next);
    return true;
  }

  holeRatio(): number {
    return this.mask ? this.mask.holeRatio() : 0;
  }

  /** Live status line: percentage plus the benchmark bucket it falls in. */
  ratioLabel(): string {
    if (!this.mask) return "no image";
    const ratio = this.mask.holeRatio();
    const pct = (ratio * 100).toFixed(1);
    const bucket = bucketForRatio(ratio);
    return bucket ? `hole ${pct}% (bucket ${bucket.label})` : `hole ${pct}% (outside benchmark buckets)`;
  }

  submitDisabledReason(): string | null {
    if (!this.source || !this.mask) return "load an image first";
    if (this.pending) return "request in flight";
    if (this.mask.holeCount() === 0) return "paint a hole first";
    return null;
  }

  canSubmit(): boolean {
    return this.submitDisabledReason() === null;
  }

  /**
   * Send the current image and mask to the service. At most one request is
   * in flight; errors land in `banner` and leave the editor state untouched.
   */
  async submit(): Promise<boolean> {
    if (!this.source || !this.mask) throw new Error("no image loaded");
    if (this.pending) return false;
    this.pending = true;
    this.banner = null;
    try {
      const outcome: InpaintOutcome = await this.client.inpaint(this.source.png, this.mask.toPng());
      this.lastResult = outcome.result;
      return true;
    } catch (err) {
      if (err instanceof ServiceError) {
        this.banner = err.message;
        return false;
      }
      throw err;
    } finally {
      this.pending = false;
    }
  }

  canAdoptResult(): boolean {
    return this.lastResult !== null;
  }

  /** Continue editing from the inpainted result: it becomes the new source. */
  adoptResult(): void {
    if (!this.source || !this.lastResult) throw new Error("no result to adopt");
    this.history.push(this.snapshot());
    this.source = { width: this.source.width, height: this.source.height, png: this.lastResult };
    this.mask = new MaskLayer(this.source.width, this.source.height);
    this.lastResult = null;
  }

  dismissBanner(): void {
    this.banner = null;
  }

  /** Current mask as a white-keep PNG plus a timestamped download name. */
  exportMask(now: Date = new Date()): { filename: string; png: Uint8Array } {
    if (!this.mask) throw new Error("no image loaded");
    const stamp = now
      .toISOString()
      .replace(/[-:]/g, "")
      .replace(/\..*$/, "")
      .replace("T", "-");
    return { filename: `mask-${stamp}.png`, png: this.mask.toPng() };
  }
}

// Playhead movement and coalesced frame loading.

import type { SegmentLike } from "./timeline.js";

/** Clamp a frame index into [0, frames); an empty recording pins to 0. */
export function clampFrame(frame: number, frames: number): number {
  if (frames <= 0) return 0;
  return Math.min(Math.max(0, Math.round(frame)), frames - 1);
}

export function stepFrame(current: number, delta: number, frames: number): number {
  return clampFrame(current + delta, frames);
}

/** Start frame of the first segment after the playhead, if any. */
export function nextSegmentStart(segments: SegmentLike[], current: number): number | null {
  let best: number | null = null;
  for (const segment of segments) {
    if (segment.start_frame > current && (best === null || segment.start_frame < best)) {
      best = segment.start_frame;
    }
  }
  return best;
}

/** Start frame of the last segment beginning before the playhead, if any. */
export function prevSegmentStart(segments: SegmentLike[], current: number): number | null {
  let best: number | null = null;
  for (const segment of segments) {
    if (segment.start_frame < current && (best === null || segment.start_frame > best)) {
      best = segment.start_frame;
    }
  }
  return best;
}

export interface FrameSink<T> {
  show(frame: number, payload: T): void;
  showError?(frame: number, error: unknown): void;
}

/**
 * Newest-wins frame loader: at most one fetch in flight, and when a burst of
 * requests arrives (scrubbing) only the latest outstanding frame is fetched
 * next, so the final displayed frame always equals the final request.
 */
export class FrameCoalescer<T> {
  private wanted: number | null = null;
  private inFlight = false;
  private shown: number | null = null;

  constructor(
    private readonly load: (frame: number) => Promise<T>,
    private readonly sink: FrameSink<T>,
  ) {}

  get shownFrame(): number | null {
    return this.shown;
  }

  /** Ask for a frame; safe to call at pointer-move rates. */
  request(frame: number): void {
    this.wanted = frame;
    if (!this.inFlight) void this.pump();
  }

  /** Resolves when the displayed frame has caught up with the last request. */
  async settle(): Promise<void> {
    while (this.inFlight) {
      await new Promise((resolve) => setTimeout(resolve, 2));
    }
  }

  private async pump(): Promise<void> {
    this.inFlight = true;
    try {
      while (this.wanted !== null && this.wanted !== this.shown) {
        const frame = this.wanted;
        try {
          const payload = await this.load(frame);
          this.shown = frame;
          // Only paint if no newer request arrived while loading.
          if (this.wanted === frame) this.sink.show(frame, payload);
        } catch (error) {
          this.shown = frame; // do not retry a failing frame in a tight loop
          if (this.wanted === frame) this.sink.showError?.(frame, error);
        }
      }
    } finally {
      this.inFlight = false;
    }
  }
}

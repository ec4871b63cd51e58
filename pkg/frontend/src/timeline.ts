// Timeline geometry: frame intervals -> pixel spans and stacking lanes.
// Pure functions so the math is testable without a DOM.

export interface Viewport {
  /** First visible frame (may be fractional mid-zoom). */
  firstFrame: number;
  /** Pixels per frame; must be > 0. */
  zoom: number;
}

export interface SegmentLike {
  annotation_id: string;
  start_frame: number;
  end_frame: number;
}

export interface SegmentSpan {
  id: string;
  /** Span before clipping: rawLeft may be negative, rawWidth is always
   * (end - start + 1) * zoom. */
  rawLeft: number;
  rawWidth: number;
  /** Span clipped to [0, widgetWidth). */
  left: number;
  width: number;
  lane: number;
  visible: boolean;
}

/** Lowest lane per segment such that no two segments in a lane overlap;
 * greedy by start frame, so lanes are stable under scrolling and zooming. */
export function assignLanes(segments: SegmentLike[]): Map<string, number> {
  const order = [...segments].sort(
    (a, b) =>
      a.start_frame - b.start_frame ||
      a.end_frame - b.end_frame ||
      (a.annotation_id < b.annotation_id ? -1 : 1),
  );
  const laneEnds: number[] = [];
  const lanes = new Map<string, number>();
  for (const segment of order) {
    let lane = laneEnds.findIndex((end) => end < segment.start_frame);
    if (lane === -1) {
      lane = laneEnds.length;
      laneEnds.push(segment.end_frame);
    } else {
      laneEnds[lane] = segment.end_frame;
    }
    lanes.set(segment.annotation_id, lane);
  }
  return lanes;
}

export function layoutSegments(
  segments: SegmentLike[],
  viewport: Viewport,
  widgetWidth: number,
): SegmentSpan[] {
  if (viewport.zoom <= 0) throw new Error(`zoom must be positive, got ${viewport.zoom}`);
  const lanes = assignLanes(segments);
  return segments.map((segment) => {
    const rawLeft = (segment.start_frame - viewport.firstFrame) * viewport.zoom;
    const rawWidth = (segment.end_frame - segment.start_frame + 1) * viewport.zoom;
    const left = Math.max(0, rawLeft);
    const right = Math.min(widgetWidth, rawLeft + rawWidth);
    const width = Math.max(0, right - left);
    return {
      id: segment.annotation_id,
      rawLeft,
      rawWidth,
      left,
      width,
      lane: lanes.get(segment.annotation_id) ?? 0,
      visible: width > 0,
    };
  });
}

/** Frame under a widget-local x coordinate (for click-to-seek). */
export function frameAtX(viewport: Viewport, x: number): number {
  return Math.floor(viewport.firstFrame + x / viewport.zoom);
}

/** Keep the viewport inside the recording; zoom is preserved. */
export function clampViewport(
  viewport: Viewport,
  recordingFrames: number,
  widgetWidth: number,
): Viewport {
  const visibleFrames = widgetWidth / viewport.zoom;
  const maxFirst = Math.max(0, recordingFrames - visibleFrames);
  return {
    firstFrame: Math.min(Math.max(0, viewport.firstFrame), maxFirst),
    zoom: viewport.zoom,
  };
}

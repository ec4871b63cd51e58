import { describe, expect, it } from "vitest";

import {
  FrameCoalescer,
  clampFrame,
  nextSegmentStart,
  prevSegmentStart,
  stepFrame,
} from "../src/playhead.js";

const segments = [
  { annotation_id: "a", start_frame: 10, end_frame: 20 },
  { annotation_id: "b", start_frame: 30, end_frame: 40 },
];

describe("clamping", () => {
  it("stays inside the recording", () => {
    expect(clampFrame(-5, 100)).toBe(0);
    expect(clampFrame(99, 100)).toBe(99);
    expect(clampFrame(100, 100)).toBe(99);
    expect(clampFrame(3, 0)).toBe(0);
  });

  it("step forward at the last frame leaves the playhead unchanged", () => {
    expect(stepFrame(99, 1, 100)).toBe(99);
    expect(stepFrame(0, -1, 100)).toBe(0);
    expect(stepFrame(50, 6, 100)).toBe(56);
  });
});

describe("segment jumps", () => {
  it("jump-to-next from frame 0 lands on the first segment start", () => {
    expect(nextSegmentStart(segments, 0)).toBe(10);
    expect(nextSegmentStart(segments, 10)).toBe(30);
    expect(nextSegmentStart(segments, 35)).toBeNull();
  });

  it("jump-to-prev mirrors it", () => {
    expect(prevSegmentStart(segments, 35)).toBe(30);
    expect(prevSegmentStart(segments, 30)).toBe(10);
    expect(prevSegmentStart(segments, 5)).toBeNull();
  });
});

describe("FrameCoalescer", () => {
  it("newest request wins a rapid scrub", async () => {
    const loaded: number[] = [];
    const shown: number[] = [];
    const coalescer = new FrameCoalescer(
      async (frame) => {
        loaded.push(frame);
        await new Promise((resolve) => setTimeout(resolve, 1));
        return frame;
      },
      { show: (frame) => shown.push(frame) },
    );
    for (let frame = 0; frame <= 500; frame++) coalescer.request(frame);
    await coalescer.settle();
    expect(shown.at(-1)).toBe(500);
    expect(coalescer.shownFrame).toBe(500);
    // coalescing: far fewer fetches than requests
    expect(loaded.length).toBeLessThan(50);
  });

  it("a failing frame surfaces as an error, not a crash", async () => {
    const errors: number[] = [];
    const coalescer = new FrameCoalescer(
      async (frame) => {
        if (frame === 7) throw new Error("boom");
        return frame;
      },
      { show: () => undefined, showError: (frame) => errors.push(frame) },
    );
    coalescer.request(7);
    await coalescer.settle();
    expect(errors).toEqual([7]);
    coalescer.request(8); // still serviceable afterwards
    await coalescer.settle();
    expect(coalescer.shownFrame).toBe(8);
  });

  it("stale responses never overwrite newer ones", async () => {
    const shown: number[] = [];
    let delay = 20;
    const coalescer = new FrameCoalescer(
      async (frame) => {
        const wait = delay;
        delay = 1;
        await new Promise((resolve) => setTimeout(resolve, wait));
        return frame;
      },
      { show: (frame) => shown.push(frame) },
    );
    coalescer.request(1); // slow
    await new Promise((resolve) => setTimeout(resolve, 2));
    coalescer.request(2); // fast, newer
    await coalescer.settle();
    expect(shown.at(-1)).toBe(2);
    expect(shown).not.toContain(1); // the slow frame was already stale
  });
});

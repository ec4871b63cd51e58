import { beforeEach, describe, expect, it } from "vitest";

import { AppController } from "../src/app.js";
import { FakeApi } from "./fakes.js";

async function makeApp(api = new FakeApi()) {
  document.body.innerHTML = `<div id="app" tabindex="0"></div>`;
  const root = document.getElementById("app")!;
  const app = new AppController(root, api, { author: "tester" });
  await app.start();
  await app.settle();
  return { app, root, api };
}

function key(root: HTMLElement, keyName: string, shift = false) {
  root.dispatchEvent(
    new KeyboardEvent("keydown", { key: keyName, shiftKey: shift, bubbles: true }),
  );
}

describe("AppController", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("loads the first recording and renders the picker", async () => {
    const { app, root } = await makeApp();
    expect(app.current?.id).toBe("B07-O-20210314");
    const options = root.querySelectorAll("option");
    expect(options.length).toBeGreaterThan(0);
  });

  it("maps frame index to capture wall-clock time at the 5 s cadence", async () => {
    const { app } = await makeApp();
    expect(app.captureTime(0)).toBe("07:00:00");
    expect(app.captureTime(12)).toBe("07:01:00");
    expect(app.captureTime(7)).toBe("07:00:35");
  });

  it("keyboard stepping clamps at the ends", async () => {
    const { app, root } = await makeApp();
    key(root, "ArrowLeft");
    expect(app.playhead).toBe(0);
    key(root, "End");
    expect(app.playhead).toBe(99);
    key(root, "ArrowRight");
    expect(app.playhead).toBe(99); // unchanged at the last frame
    key(root, "ArrowLeft", true);
    expect(app.playhead).toBe(93); // coarse step default 6
  });

  it("jump-to-next-segment from frame 0 lands on the first segment", async () => {
    const api = new FakeApi();
    await api.putAnnotation({
      annotation_id: "s1",
      recording_id: "B07-O-20210314",
      start_frame: 10,
      end_frame: 20,
      event: "",
      animal_id: null,
      author: "seed",
    });
    await api.putAnnotation({
      annotation_id: "s2",
      recording_id: "B07-O-20210314",
      start_frame: 30,
      end_frame: 40,
      event: "",
      animal_id: null,
      author: "seed",
    });
    const { app, root } = await makeApp(api);
    key(root, "n");
    expect(app.playhead).toBe(10);
    key(root, "n");
    expect(app.playhead).toBe(30);
    key(root, "p");
    expect(app.playhead).toBe(10);
  });

  it("clicking a suggestion fills the animal id", async () => {
    const { app, root } = await makeApp();
    app.setPlayhead(15); // suggestions live in [10, 40]
    await app.settle();
    app.beginCreate();
    const buttons = root.querySelectorAll<HTMLButtonElement>("[data-suggestion]");
    expect(buttons.length).toBe(5);
    buttons[0]!.click();
    expect(app.draft?.animal_id).toBe("T01");
    const animalInput = root.querySelector<HTMLInputElement>('[data-role="animal"]')!;
    expect(animalInput.value).toBe("T01");
  });

  it("id-required event without an ID shows an inline error, no request", async () => {
    const { app, root, api } = await makeApp();
    app.beginCreate();
    app.updateDraft({ event: "mating", animal_id: null });
    const saved = await app.saveSelected();
    expect(saved).toBe(false);
    expect(api.putCalls).toBe(0);
    const error = root.querySelector('[data-role="error"]')!;
    expect(error.classList.contains("hidden")).toBe(false);
    expect(error.textContent).toMatch(/animal ID/);
  });

  it("server rejection restores the prior segment bounds", async () => {
    const api = new FakeApi();
    await api.putAnnotation({
      annotation_id: "s1",
      recording_id: "B07-O-20210314",
      start_frame: 3,
      end_frame: 5,
      event: "",
      animal_id: null,
      author: "seed",
    });
    const { app } = await makeApp(api);
    app.selectSegment("s1");
    app.updateDraft({ end_frame: 9 });
    api.rejectNextPut = "server said no";
    const saved = await app.saveSelected();
    expect(saved).toBe(false);
    expect(app.inlineError).toMatch(/server said no/);
    expect(app.store.get("s1")?.end_frame).toBe(5);
    expect(app.draft?.end_frame).toBe(5); // inspector shows the restored state
  });

  it("resize via draft plus save persists through the API", async () => {
    const api = new FakeApi();
    await api.putAnnotation({
      annotation_id: "s1",
      recording_id: "B07-O-20210314",
      start_frame: 3,
      end_frame: 5,
      event: "",
      animal_id: null,
      author: "seed",
    });
    const { app } = await makeApp(api);
    app.selectSegment("s1");
    app.updateDraft({ end_frame: 9 });
    expect(await app.saveSelected()).toBe(true);
    expect(api.records.get("s1")?.end_frame).toBe(9);
    expect(api.records.get("s1")?.revision).toBe(2);
  });

  it("create, save, delete is one API call each", async () => {
    const { app, api } = await makeApp();
    app.beginCreate();
    app.updateDraft({ event: "basking", end_frame: 4 });
    expect(await app.saveSelected()).toBe(true);
    expect(api.putCalls).toBe(1);
    await app.deleteSelected();
    expect(api.deleteCalls).toBe(1);
    expect(app.store.all()).toHaveLength(0);
  });

  it("timeline renders one element per visible segment", async () => {
    const api = new FakeApi();
    for (const [id, start, end] of [
      ["a", 0, 10],
      ["b", 5, 15],
    ] as const) {
      await api.putAnnotation({
        annotation_id: id,
        recording_id: "B07-O-20210314",
        start_frame: start,
        end_frame: end,
        event: "",
        animal_id: null,
        author: "seed",
      });
    }
    const { root } = await makeApp(api);
    const segments = root.querySelectorAll(".segment");
    expect(segments.length).toBe(2);
    const tops = [...segments].map((el) => (el as HTMLElement).style.top);
    expect(new Set(tops).size).toBe(2); // overlapping pair lands in two lanes
  });
});

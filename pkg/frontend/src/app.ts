// The annotation page: recording picker, frame viewer, timeline, inspector,
// and the top-5 identity suggestion panel. One instance per page.

import type { AnnotationApi } from "./api.js";
import {
  FrameCoalescer,
  clampFrame,
  nextSegmentStart,
  prevSegmentStart,
  stepFrame,
} from "./playhead.js";
import { SegmentStore, newAnnotationId, validateDraft } from "./store.js";
import {
  Viewport,
  clampViewport,
  frameAtX,
  layoutSegments,
} from "./timeline.js";
import {
  AnnotationDraft,
  EventSpec,
  RecordingInfo,
  Suggestion,
  draftOf,
} from "./types.js";

export interface AppOptions {
  /** Frames per plain arrow key. */
  stepSmall?: number;
  /** Frames per shift-arrow (coarse scrub). */
  stepLarge?: number;
  author?: string;
  timelineWidth?: number;
}

interface Dom {
  picker: HTMLSelectElement;
  readout: HTMLElement;
  frame: HTMLImageElement;
  frameError: HTMLElement;
  start: HTMLInputElement;
  end: HTMLInputElement;
  event: HTMLSelectElement;
  animal: HTMLInputElement;
  error: HTMLElement;
  newButton: HTMLButtonElement;
  save: HTMLButtonElement;
  deleteButton: HTMLButtonElement;
  suggestions: HTMLElement;
  timeline: HTMLElement;
  lanes: HTMLElement;
  playheadLine: HTMLElement;
  zoomIn: HTMLElement;
  zoomOut: HTMLElement;
}

const LANE_HEIGHT = 22;

export class AppController {
  readonly api: AnnotationApi;
  readonly store: SegmentStore;

  recordings: RecordingInfo[] = [];
  events: EventSpec[] = [];
  current: RecordingInfo | null = null;
  playhead = 0;
  viewport: Viewport = { firstFrame: 0, zoom: 4 };
  selectedId: string | null = null;
  draft: AnnotationDraft | null = null;
  suggestions: Suggestion[] = [];
  suggestionsAvailable = true;
  inlineError = "";

  private readonly options: Required<AppOptions>;
  private readonly frames: FrameCoalescer<Blob>;
  private readonly suggestionLoader: FrameCoalescer<void>;
  private dom!: Dom;
  private dragging: "playhead" | "start" | "end" | null = null;

  constructor(
    private readonly root: HTMLElement,
    api: AnnotationApi,
    options: AppOptions = {},
  ) {
    this.api = api;
    this.store = new SegmentStore(api);
    this.options = {
      stepSmall: options.stepSmall ?? 1,
      stepLarge: options.stepLarge ?? 6,
      author: options.author ?? "grader",
      timelineWidth: options.timelineWidth ?? 960,
    };
    this.frames = new FrameCoalescer(
      (frame) => this.api.fetchFrame(this.requireRecording().id, frame),
      {
        show: (frame, blob) => this.paintFrame(frame, blob),
        showError: (frame) => this.paintFrameError(frame),
      },
    );
    this.suggestionLoader = new FrameCoalescer(
      async (frame) => {
        const reply = await this.api.suggestions(this.requireRecording().id, frame);
        this.suggestions = reply.suggestions;
        this.suggestionsAvailable = reply.available;
      },
      { show: () => this.renderSuggestions(), showError: () => undefined },
    );
    this.buildShell();
  }

  // -- lifecycle ---------------------------------------------------------------

  async start(): Promise<void> {
    const [recordings, schema] = await Promise.all([
      this.api.recordings(),
      this.api.schema(),
    ]);
    this.recordings = recordings;
    this.events = schema.events;
    this.renderRecordingPicker();
    this.renderEventChoices();
    const first = recordings[0];
    if (first) await this.openRecording(first.id);
  }

  async openRecording(recordingId: string): Promise<void> {
    const info = this.recordings.find((r) => r.id === recordingId);
    if (!info) throw new Error(`unknown recording ${recordingId}`);
    this.current = info;
    this.selectedId = null;
    this.draft = null;
    this.inlineError = "";
    this.store.load(await this.api.segments(recordingId));
    this.playhead = 0;
    this.viewport = clampViewport(
      { firstFrame: 0, zoom: this.options.timelineWidth / Math.max(1, this.frameCount()) },
      this.frameCount(),
      this.options.timelineWidth,
    );
    this.dom.picker.value = recordingId;
    this.requestFrame();
    this.requestSuggestions();
    this.renderAll();
  }

  /** Wait until in-flight frame and suggestion fetches have settled. */
  async settle(): Promise<void> {
    await this.frames.settle();
    await this.suggestionLoader.settle();
  }

  // -- state helpers ------------------------------------------------------------

  requireRecording(): RecordingInfo {
    if (!this.current) throw new Error("no recording open");
    return this.current;
  }

  frameCount(): number {
    const declared = this.current?.frames;
    if (declared && declared > 0) return declared;
    const last = this.store.all().reduce((acc, s) => Math.max(acc, s.end_frame), -1);
    return last + 1;
  }

  /** Capture wall-clock time of a frame, from the recording's metadata. */
  captureTime(frame: number): string {
    const info = this.current;
    if (!info?.capture_start) return "";
    const parts = info.capture_start.split(":").map(Number);
    const seconds =
      (parts[0] ?? 0) * 3600 +
      (parts[1] ?? 0) * 60 +
      (parts[2] ?? 0) +
      frame * (info.capture_cadence_s ?? 5);
    const hh = Math.floor(seconds / 3600) % 24;
    const mm = Math.floor((seconds % 3600) / 60);
    const ss = Math.floor(seconds % 60);
    const pad = (v: number) => v.toString().padStart(2, "0");
    return `${pad(hh)}:${pad(mm)}:${pad(ss)}`;
  }

  // -- navigation ----------------------------------------------------------------

  setPlayhead(frame: number): void {
    this.playhead = clampFrame(frame, this.frameCount());
    this.keepPlayheadVisible();
    this.requestFrame();
    this.requestSuggestions();
    this.renderTimeline();
    this.renderReadout();
  }

  step(delta: number): void {
    this.setPlayhead(stepFrame(this.playhead, delta, this.frameCount()));
  }

  jumpToNextSegment(): void {
    const target = nextSegmentStart(this.store.all(), this.playhead);
    if (target !== null) this.setPlayhead(target);
  }

  jumpToPrevSegment(): void {
    const target = prevSegmentStart(this.store.all(), this.playhead);
    if (target !== null) this.setPlayhead(target);
  }

  zoomBy(factor: number): void {
    const zoom = Math.min(64, Math.max(0.02, this.viewport.zoom * factor));
    const anchor = this.playhead - this.viewport.firstFrame;
    this.viewport = clampViewport(
      { firstFrame: this.playhead - anchor * (this.viewport.zoom / zoom), zoom },
      this.frameCount(),
      this.options.timelineWidth,
    );
    this.renderTimeline();
  }

  private keepPlayheadVisible(): void {
    const { firstFrame, zoom } = this.viewport;
    const visible = this.options.timelineWidth / zoom;
    if (this.playhead < firstFrame || this.playhead >= firstFrame + visible) {
      this.viewport = clampViewport(
        { firstFrame: this.playhead - visible / 2, zoom },
        this.frameCount(),
        this.options.timelineWidth,
      );
    }
  }

  private requestFrame(): void {
    if (this.current?.frames) this.frames.request(this.playhead);
  }

  private requestSuggestions(): void {
    this.suggestionLoader.request(this.playhead);
  }

  // -- selection and editing -------------------------------------------------------

  selectSegment(annotationId: string | null): void {
    this.selectedId = annotationId;
    this.inlineError = "";
    const record = annotationId ? this.store.get(annotationId) : undefined;
    this.draft = record ? draftOf(record) : null;
    this.renderTimeline();
    this.renderInspector();
  }

  beginCreate(): void {
    const frame = this.playhead;
    this.draft = {
      annotation_id: newAnnotationId(),
      recording_id: this.requireRecording().id,
      start_frame: frame,
      end_frame: frame,
      event: "",
      animal_id: null,
      author: this.options.author,
    };
    this.selectedId = this.draft.annotation_id;
    this.inlineError = "";
    this.renderTimeline();
    this.renderInspector();
  }

  /** Mutate the working draft (resize, retag) without touching the server. */
  updateDraft(changes: Partial<AnnotationDraft>): void {
    if (!this.draft) return;
    this.draft = { ...this.draft, ...changes };
    this.inlineError = "";
    this.renderTimeline();
    this.renderInspector();
  }

  applySuggestion(index: number): void {
    const pick = this.suggestions[index];
    if (!pick || !this.draft) return;
    this.updateDraft({ animal_id: pick.individual_id });
  }

  /** Validate client-side, then PUT; a rejection restores the prior state. */
  async saveSelected(): Promise<boolean> {
    if (!this.draft) return false;
    const problem = validateDraft(this.draft, this.events);
    if (problem) {
      this.inlineError = problem;
      this.renderInspector();
      return false; // no request leaves the browser
    }
    try {
      const stored = await this.store.commit(this.draft);
      this.selectedId = stored.annotation_id;
      this.draft = draftOf(stored);
      this.inlineError = "";
    } catch (error) {
      this.inlineError = error instanceof Error ? error.message : String(error);
      const prior = this.selectedId ? this.store.get(this.selectedId) : undefined;
      this.draft = prior ? draftOf(prior) : this.draft;
      this.renderTimeline();
      this.renderInspector();
      return false;
    }
    this.renderTimeline();
    this.renderInspector();
    return true;
  }

  async deleteSelected(): Promise<void> {
    if (!this.selectedId) return;
    try {
      await this.store.remove(this.selectedId);
      this.selectSegment(null);
    } catch (error) {
      this.inlineError = error instanceof Error ? error.message : String(error);
      this.renderInspector();
    }
    this.renderTimeline();
  }

  // -- DOM ---------------------------------------------------------------------------

  private buildShell(): void {
    this.root.innerHTML = `
      <div class="trapline-app">
        <header>
          <select data-role="picker" title="recording"></select>
          <span data-role="readout" class="readout"></span>
          <span class="spacer"></span>
          <button data-role="zoom-out" title="zoom out">&minus;</button>
          <button data-role="zoom-in" title="zoom in">+</button>
        </header>
        <main>
          <div class="viewer">
            <img data-role="frame" alt="frame" draggable="false" />
            <div data-role="frame-error" class="frame-error hidden">frame unavailable</div>
          </div>
          <aside class="panel">
            <h3>Annotation</h3>
            <div class="field"><label>start</label><input data-role="start" type="number" min="0" /></div>
            <div class="field"><label>end</label><input data-role="end" type="number" min="0" /></div>
            <div class="field"><label>event</label><select data-role="event"></select></div>
            <div class="field"><label>animal</label><input data-role="animal" type="text" placeholder="none" /></div>
            <div data-role="error" class="inline-error hidden"></div>
            <div class="buttons">
              <button data-role="new">new at playhead</button>
              <button data-role="save" class="primary">save</button>
              <button data-role="delete">delete</button>
            </div>
            <h3>Top-5 suggestions</h3>
            <ol data-role="suggestions" class="suggestions"></ol>
          </aside>
        </main>
        <div class="timeline" data-role="timeline">
          <div data-role="lanes" class="lanes"></div>
          <div data-role="playhead-line" class="playhead-line"></div>
        </div>
        <footer class="help">
          arrows: step &middot; shift+arrows: coarse &middot; n/p: next/prev segment &middot;
          c: new &middot; enter: save &middot; delete: remove &middot; drag edges to resize
        </footer>
      </div>`;
    const grab = <T extends HTMLElement>(role: string): T =>
      this.root.querySelector<T>(`[data-role="${role}"]`)!;
    this.dom = {
      picker: grab<HTMLSelectElement>("picker"),
      readout: grab("readout"),
      frame: grab<HTMLImageElement>("frame"),
      frameError: grab("frame-error"),
      start: grab<HTMLInputElement>("start"),
      end: grab<HTMLInputElement>("end"),
      event: grab<HTMLSelectElement>("event"),
      animal: grab<HTMLInputElement>("animal"),
      error: grab("error"),
      newButton: grab<HTMLButtonElement>("new"),
      save: grab<HTMLButtonElement>("save"),
      deleteButton: grab<HTMLButtonElement>("delete"),
      suggestions: grab("suggestions"),
      timeline: grab("timeline"),
      lanes: grab("lanes"),
      playheadLine: grab("playhead-line"),
      zoomIn: grab("zoom-in"),
      zoomOut: grab("zoom-out"),
    };
    this.bindEvents();
  }

  private bindEvents(): void {
    const d = this.dom;
    d.picker.addEventListener("change", () => {
      void this.openRecording(d.picker.value);
    });
    d.zoomIn.addEventListener("click", () => this.zoomBy(2));
    d.zoomOut.addEventListener("click", () => this.zoomBy(0.5));
    d.newButton.addEventListener("click", () => this.beginCreate());
    d.save.addEventListener("click", () => void this.saveSelected());
    d.deleteButton.addEventListener("click", () => void this.deleteSelected());

    const numberInput = (el: HTMLInputElement, key: "start_frame" | "end_frame") => {
      el.addEventListener("change", () => {
        const value = Number(el.value);
        if (Number.isFinite(value)) this.updateDraft({ [key]: Math.round(value) });
      });
    };
    numberInput(d.start, "start_frame");
    numberInput(d.end, "end_frame");
    d.event.addEventListener("change", () => {
      this.updateDraft({ event: d.event.value });
    });
    d.animal.addEventListener("change", () => {
      const value = d.animal.value.trim();
      this.updateDraft({ animal_id: value || null });
    });

    d.timeline.addEventListener("pointerdown", (ev) => this.onTimelineDown(ev as PointerEvent));
    d.timeline.addEventListener("pointermove", (ev) => this.onTimelineMove(ev as PointerEvent));
    d.timeline.addEventListener("pointerup", () => (this.dragging = null));
    d.timeline.addEventListener("pointerleave", () => (this.dragging = null));

    this.root.addEventListener("keydown", (ev) => this.onKey(ev as KeyboardEvent));
  }

  private timelineX(ev: PointerEvent): number {
    const rect = this.dom.timeline.getBoundingClientRect();
    return ev.clientX - rect.left;
  }

  private onTimelineDown(ev: PointerEvent): void {
    const target = ev.target as HTMLElement;
    const handle = target.dataset?.handle;
    const segmentId = target.closest?.("[data-segment]")
      ? (target.closest("[data-segment]") as HTMLElement).dataset.segment
      : undefined;
    if (handle && segmentId) {
      this.selectSegment(segmentId);
      this.dragging = handle === "start" ? "start" : "end";
      return;
    }
    if (segmentId) {
      this.selectSegment(segmentId);
      return;
    }
    this.dragging = "playhead";
    this.setPlayhead(frameAtX(this.viewport, this.timelineX(ev)));
  }

  private onTimelineMove(ev: PointerEvent): void {
    if (!this.dragging) return;
    const frame = clampFrame(frameAtX(this.viewport, this.timelineX(ev)), this.frameCount());
    if (this.dragging === "playhead") {
      this.setPlayhead(frame);
    } else if (this.draft) {
      if (this.dragging === "start") {
        this.updateDraft({ start_frame: Math.min(frame, this.draft.end_frame) });
      } else {
        this.updateDraft({ end_frame: Math.max(frame, this.draft.start_frame) });
      }
    }
  }

  private onKey(ev: KeyboardEvent): void {
    const tag = (ev.target as HTMLElement | null)?.tagName;
    if (tag === "INPUT" || tag === "SELECT" || tag === "TEXTAREA") {
      if (ev.key === "Enter") void this.saveSelected();
      return;
    }
    const coarse = ev.shiftKey ? this.options.stepLarge : this.options.stepSmall;
    switch (ev.key) {
      case "ArrowRight":
        this.step(coarse);
        break;
      case "ArrowLeft":
        this.step(-coarse);
        break;
      case "Home":
        this.setPlayhead(0);
        break;
      case "End":
        this.setPlayhead(this.frameCount() - 1);
        break;
      case "n":
        this.jumpToNextSegment();
        break;
      case "p":
        this.jumpToPrevSegment();
        break;
      case "c":
        this.beginCreate();
        break;
      case "Enter":
        void this.saveSelected();
        break;
      case "Delete":
      case "Backspace":
        void this.deleteSelected();
        break;
      case "+":
        this.zoomBy(2);
        break;
      case "-":
        this.zoomBy(0.5);
        break;
      default:
        return;
    }
    ev.preventDefault?.();
  }

  // -- rendering -----------------------------------------------------------------------

  private renderAll(): void {
    this.renderReadout();
    this.renderTimeline();
    this.renderInspector();
    this.renderSuggestions();
  }

  private renderRecordingPicker(): void {
    const picker = this.dom.picker;
    picker.innerHTML = "";
    for (const rec of this.recordings) {
      const option = document.createElement("option");
      option.value = rec.id;
      option.textContent = rec.frames != null ? `${rec.id} (${rec.frames} frames)` : rec.id;
      picker.appendChild(option);
    }
  }

  private renderEventChoices(): void {
    const select = this.dom.event;
    select.innerHTML = "";
    const names = ["", "animal-present", ...this.events.map((e) => e.name)];
    for (const name of names) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name === "" ? "(plain segment)" : name;
      select.appendChild(option);
    }
  }

  private renderReadout(): void {
    const total = this.frameCount();
    const time = this.captureTime(this.playhead);
    this.dom.readout.textContent = total
      ? `frame ${this.playhead} / ${total - 1}${time ? ` · ${time}` : ""}`
      : "no frames";
  }

  private renderTimeline(): void {
    const lanesHost = this.dom.lanes;
    lanesHost.innerHTML = "";
    const segments = this.store.all().map((record) =>
      this.draft && record.annotation_id === this.draft.annotation_id
        ? { ...record, ...this.draft }
        : record,
    );
    if (
      this.draft &&
      !segments.some((s) => s.annotation_id === this.draft!.annotation_id)
    ) {
      segments.push({
        ...this.draft,
        modified_utc: "",
        revision: 0,
      });
    }
    const spans = layoutSegments(segments, this.viewport, this.options.timelineWidth);
    let maxLane = 0;
    for (const span of spans) {
      maxLane = Math.max(maxLane, span.lane);
      if (!span.visible) continue;
      const el = document.createElement("div");
      el.className = "segment" + (span.id === this.selectedId ? " selected" : "");
      el.dataset.segment = span.id;
      el.style.left = `${span.left}px`;
      el.style.width = `${Math.max(2, span.width)}px`;
      el.style.top = `${4 + span.lane * LANE_HEIGHT}px`;
      const record = segments.find((s) => s.annotation_id === span.id);
      el.title = record
        ? `${record.event || "segment"} [${record.start_frame}, ${record.end_frame}]` +
          (record.animal_id ? ` ${record.animal_id}` : "")
        : span.id;
      const startHandle = document.createElement("span");
      startHandle.className = "handle";
      startHandle.dataset.handle = "start";
      const endHandle = document.createElement("span");
      endHandle.className = "handle";
      endHandle.dataset.handle = "end";
      el.append(startHandle, endHandle);
      lanesHost.appendChild(el);
    }
    lanesHost.style.height = `${8 + (maxLane + 1) * LANE_HEIGHT}px`;
    const x = (this.playhead - this.viewport.firstFrame) * this.viewport.zoom;
    this.dom.playheadLine.style.left = `${Math.max(0, Math.min(this.options.timelineWidth, x))}px`;
  }

  private renderInspector(): void {
    const d = this.dom;
    const draft = this.draft;
    d.start.value = draft ? String(draft.start_frame) : "";
    d.end.value = draft ? String(draft.end_frame) : "";
    d.event.value = draft?.event ?? "";
    d.animal.value = draft?.animal_id ?? "";
    for (const el of [d.start, d.end, d.event, d.animal, d.save, d.deleteButton]) {
      el.disabled = !draft;
    }
    d.error.textContent = this.inlineError;
    d.error.classList.toggle("hidden", !this.inlineError);
  }

  private renderSuggestions(): void {
    const host = this.dom.suggestions;
    host.innerHTML = "";
    if (!this.suggestionsAvailable) {
      const li = document.createElement("li");
      li.className = "empty";
      li.textContent = "no re-id available";
      host.appendChild(li);
      return;
    }
    if (!this.suggestions.length) {
      const li = document.createElement("li");
      li.className = "empty";
      li.textContent = "no suggestions here";
      host.appendChild(li);
      return;
    }
    this.suggestions.forEach((pick, index) => {
      const li = document.createElement("li");
      const button = document.createElement("button");
      button.dataset.suggestion = String(index);
      button.textContent = `${pick.individual_id} (${pick.distance.toFixed(3)})`;
      button.addEventListener("click", () => this.applySuggestion(index));
      li.appendChild(button);
      host.appendChild(li);
    });
  }

  private paintFrame(frame: number, blob: Blob): void {
    this.dom.frameError.classList.add("hidden");
    const img = this.dom.frame;
    const createUrl = (globalThis.URL as typeof URL & { createObjectURL?: unknown })
      .createObjectURL;
    if (typeof createUrl === "function") {
      const old = img.dataset.objectUrl;
      const url = URL.createObjectURL(blob);
      img.src = url;
      img.dataset.objectUrl = url;
      if (old) URL.revokeObjectURL(old);
    } else {
      // Test environments without object URLs: point at the API directly.
      img.src = this.api.frameUrl(this.requireRecording().id, frame);
    }
  }

  private paintFrameError(_frame: number): void {
    this.dom.frameError.classList.remove("hidden");
  }
}

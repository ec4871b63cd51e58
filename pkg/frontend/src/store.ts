// Client-side segment state: validation, optimistic edits, rollback.

import type { AnnotationApi } from "./api.js";
import type { AnnotationDraft, AnnotationRecord, EventSpec } from "./types.js";

/** Client-side check mirroring the server's rules, so obviously bad edits
 * never leave the browser. Returns an error message or null. */
export function validateDraft(draft: AnnotationDraft, events: EventSpec[]): string | null {
  if (!draft.annotation_id) return "missing annotation id";
  if (!draft.recording_id) return "missing recording id";
  if (!Number.isInteger(draft.start_frame) || !Number.isInteger(draft.end_frame)) {
    return "frames must be integers";
  }
  if (draft.start_frame < 0) return "start frame is negative";
  if (draft.start_frame > draft.end_frame) return "start frame is after end frame";
  if (draft.event && draft.event !== "animal-present") {
    const spec = events.find((e) => e.name === draft.event);
    if (!spec) return `unknown event "${draft.event}"`;
    if (spec.id_required && !draft.animal_id) {
      return `event "${draft.event}" requires an animal ID`;
    }
  }
  return null;
}

/**
 * Holds the segments of the open recording. Every mutation is exactly one
 * API call; a server rejection restores the previous state before rethrowing.
 */
export class SegmentStore {
  private records = new Map<string, AnnotationRecord>();

  constructor(private readonly api: AnnotationApi) {}

  load(records: AnnotationRecord[]): void {
    this.records = new Map(records.map((r) => [r.annotation_id, r]));
  }

  get(annotationId: string): AnnotationRecord | undefined {
    return this.records.get(annotationId);
  }

  all(): AnnotationRecord[] {
    return [...this.records.values()].sort(
      (a, b) =>
        a.start_frame - b.start_frame ||
        a.end_frame - b.end_frame ||
        (a.annotation_id < b.annotation_id ? -1 : 1),
    );
  }

  /** PUT one draft; the stored record reflects the server's response. */
  async commit(draft: AnnotationDraft): Promise<AnnotationRecord> {
    const prior = this.records.get(draft.annotation_id);
    // Optimistic apply so the timeline tracks the drag immediately.
    this.records.set(draft.annotation_id, {
      ...draft,
      modified_utc: prior?.modified_utc ?? "",
      revision: prior?.revision ?? 0,
    });
    try {
      const stored = await this.api.putAnnotation(draft);
      this.records.set(stored.annotation_id, stored);
      return stored;
    } catch (error) {
      if (prior) this.records.set(draft.annotation_id, prior);
      else this.records.delete(draft.annotation_id);
      throw error;
    }
  }

  /** DELETE one annotation, restoring it if the server refuses. */
  async remove(annotationId: string): Promise<void> {
    const prior = this.records.get(annotationId);
    if (!prior) return;
    this.records.delete(annotationId);
    try {
      await this.api.deleteAnnotation(annotationId);
    } catch (error) {
      this.records.set(annotationId, prior);
      throw error;
    }
  }
}

export function newAnnotationId(): string {
  const token = Math.random().toString(36).slice(2, 10);
  return `web-${Date.now().toString(36)}-${token}`;
}

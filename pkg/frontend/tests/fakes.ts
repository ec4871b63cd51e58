// In-memory stand-in for the annotation service, for DOM-level unit tests.

import { ApiError, type AnnotationApi } from "../src/api.js";
import type {
  AnnotationDraft,
  AnnotationRecord,
  EventSpec,
  RecordingInfo,
  SuggestionResponse,
} from "../src/types.js";

export class FakeApi implements AnnotationApi {
  records = new Map<string, AnnotationRecord>();
  events: EventSpec[] = [
    { name: "basking", id_required: false },
    { name: "mating", id_required: true },
  ];
  recording: RecordingInfo = {
    id: "B07-O-20210314",
    frames: 100,
    fps: 30,
    width: 64,
    height: 48,
    capture_cadence_s: 5,
    capture_start: "07:00:00",
  };
  suggestionRows = [
    { individual_id: "T01", distance: 0.1 },
    { individual_id: "T02", distance: 0.2 },
    { individual_id: "T03", distance: 0.3 },
    { individual_id: "T04", distance: 0.4 },
    { individual_id: "T05", distance: 0.5 },
  ];
  putCalls = 0;
  deleteCalls = 0;
  rejectNextPut: string | null = null;

  async recordings(): Promise<RecordingInfo[]> {
    return [this.recording];
  }

  async segments(recordingId: string): Promise<AnnotationRecord[]> {
    return [...this.records.values()].filter((r) => r.recording_id === recordingId);
  }

  async schema(): Promise<{ events: EventSpec[] }> {
    return { events: this.events };
  }

  async suggestions(recordingId: string, frame: number): Promise<SuggestionResponse> {
    return {
      recording_id: recordingId,
      frame,
      available: true,
      suggestions: frame >= 10 && frame <= 40 ? this.suggestionRows : [],
    };
  }

  frameUrl(recordingId: string, frame: number): string {
    return `fake://${recordingId}/${frame}`;
  }

  async fetchFrame(): Promise<Blob> {
    return new Blob([new Uint8Array([0xff, 0xd8, 0xff])]);
  }

  async putAnnotation(draft: AnnotationDraft): Promise<AnnotationRecord> {
    this.putCalls += 1;
    if (this.rejectNextPut) {
      const message = this.rejectNextPut;
      this.rejectNextPut = null;
      throw new ApiError(400, message);
    }
    const prior = this.records.get(draft.annotation_id);
    const stored: AnnotationRecord = {
      ...draft,
      modified_utc: "2021-03-14T12:00:00+00:00",
      revision: (prior?.revision ?? 0) + 1,
    };
    this.records.set(stored.annotation_id, stored);
    return stored;
  }

  async deleteAnnotation(annotationId: string): Promise<void> {
    this.deleteCalls += 1;
    if (!this.records.delete(annotationId)) {
      throw new ApiError(404, `no annotation ${annotationId}`);
    }
  }
}

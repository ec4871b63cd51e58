// Shapes of the annotation service's JSON payloads.

export interface RecordingInfo {
  id: string;
  frames?: number;
  fps?: number;
  width?: number;
  height?: number;
  burrow?: string;
  view?: string;
  date?: string;
  capture_cadence_s: number;
  capture_start: string;
}

export interface AnnotationRecord {
  annotation_id: string;
  recording_id: string;
  start_frame: number;
  end_frame: number;
  event: string;
  animal_id: string | null;
  author: string;
  modified_utc: string;
  revision: number;
}

/** Body of a PUT; the server assigns modified_utc and revision. */
export interface AnnotationDraft {
  annotation_id: string;
  recording_id: string;
  start_frame: number;
  end_frame: number;
  event: string;
  animal_id: string | null;
  author: string;
}

export interface EventSpec {
  name: string;
  id_required: boolean;
}

export interface Suggestion {
  individual_id: string;
  distance: number;
}

export interface SuggestionResponse {
  recording_id: string;
  frame: number;
  available: boolean;
  suggestions: Suggestion[];
}

export function draftOf(record: AnnotationRecord): AnnotationDraft {
  return {
    annotation_id: record.annotation_id,
    recording_id: record.recording_id,
    start_frame: record.start_frame,
    end_frame: record.end_frame,
    event: record.event,
    animal_id: record.animal_id,
    author: record.author,
  };
}

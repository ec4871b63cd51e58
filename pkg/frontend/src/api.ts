import type {
  AnnotationDraft,
  AnnotationRecord,
  EventSpec,
  RecordingInfo,
  SuggestionResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, message);
}

/** What the app needs from the service; ApiClient is the real implementation. */
export interface AnnotationApi {
  recordings(): Promise<RecordingInfo[]>;
  segments(recordingId: string): Promise<AnnotationRecord[]>;
  schema(): Promise<{ events: EventSpec[] }>;
  suggestions(recordingId: string, frame: number): Promise<SuggestionResponse>;
  frameUrl(recordingId: string, frame: number): string;
  fetchFrame(recordingId: string, frame: number): Promise<Blob>;
  putAnnotation(draft: AnnotationDraft): Promise<AnnotationRecord>;
  deleteAnnotation(annotationId: string): Promise<void>;
}

/** Thin client over the annotation service; every method is one request. */
export class ApiClient implements AnnotationApi {
  constructor(private readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  recordings(): Promise<RecordingInfo[]> {
    return this.getJson("/api/recordings");
  }

  segments(recordingId: string): Promise<AnnotationRecord[]> {
    return this.getJson(`/api/recordings/${encodeURIComponent(recordingId)}/segments`);
  }

  schema(): Promise<{ events: EventSpec[] }> {
    return this.getJson("/api/schema");
  }

  suggestions(recordingId: string, frame: number): Promise<SuggestionResponse> {
    const id = encodeURIComponent(recordingId);
    return this.getJson(`/api/recordings/${id}/suggestions?frame=${frame}`);
  }

  frameUrl(recordingId: string, frame: number): string {
    const id = encodeURIComponent(recordingId);
    return `${this.baseUrl}/api/recordings/${id}/frames/${frame}`;
  }

  async fetchFrame(recordingId: string, frame: number): Promise<Blob> {
    const response = await fetch(this.frameUrl(recordingId, frame));
    if (!response.ok) throw await parseError(response);
    return await response.blob();
  }

  async putAnnotation(draft: AnnotationDraft): Promise<AnnotationRecord> {
    const id = encodeURIComponent(draft.annotation_id);
    const response = await fetch(`${this.baseUrl}/api/annotations/${id}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(draft),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as AnnotationRecord;
  }

  async deleteAnnotation(annotationId: string): Promise<void> {
    const id = encodeURIComponent(annotationId);
    const response = await fetch(`${this.baseUrl}/api/annotations/${id}`, {
      method: "DELETE",
    });
    if (!response.ok) throw await parseError(response);
  }
}

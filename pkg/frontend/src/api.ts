// HTTP client for the skelalign annotation service. Every displayed skeleton
// comes back through this module; the UI never recomputes joint math locally.

import type {
  AnnotationsResponse,
  ClipDetail,
  ClipSummary,
  JointGrid,
  PreviewResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** A write raced another editor; `currentRevision` is what the server holds now. */
export class RevisionConflictError extends Error {
  constructor(readonly currentRevision: number) {
    super(`stale revision; server is at ${currentRevision}`);
    this.name = "RevisionConflictError";
  }
}

interface ConflictDetail {
  error: string;
  current_revision: number;
}

function isConflictDetail(detail: unknown): detail is ConflictDetail {
  return (
    typeof detail === "object" &&
    detail !== null &&
    (detail as ConflictDetail).error === "revision_conflict" &&
    typeof (detail as ConflictDetail).current_revision === "number"
  );
}

export class ApiClient {
  constructor(readonly baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (response.ok) {
      return (await response.json()) as T;
    }
    let detail: unknown = null;
    try {
      detail = ((await response.json()) as { detail?: unknown }).detail ?? null;
    } catch {
      // non-JSON error body; keep detail null
    }
    if (response.status === 409 && isConflictDetail(detail)) {
      throw new RevisionConflictError(detail.current_revision);
    }
    const text = typeof detail === "string" ? detail : JSON.stringify(detail);
    throw new ApiError(`${response.status}: ${text}`, response.status, detail);
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async listClips(): Promise<ClipSummary[]> {
    const data = await this.request<{ clips: ClipSummary[] }>("/clips");
    return data.clips;
  }

  getClip(id: string): Promise<ClipDetail> {
    return this.request<ClipDetail>(`/clips/${encodeURIComponent(id)}`);
  }

  frameUrl(id: string, index: number): string {
    return `${this.baseUrl}/clips/${encodeURIComponent(id)}/frames/${index}`;
  }

  getAnnotations(id: string): Promise<AnnotationsResponse> {
    return this.request<AnnotationsResponse>(
      `/clips/${encodeURIComponent(id)}/annotations`,
    );
  }

  putAnnotations(
    id: string,
    revision: number,
    joints2d: JointGrid,
  ): Promise<AnnotationsResponse> {
    return this.request<AnnotationsResponse>(
      `/clips/${encodeURIComponent(id)}/annotations`,
      {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ revision, joints2d }),
      },
    );
  }

  interpolate(
    id: string,
    revision: number,
    joint: number,
    frameA: number,
    frameB: number,
  ): Promise<AnnotationsResponse> {
    return this.post<AnnotationsResponse>(
      `/clips/${encodeURIComponent(id)}/interpolate`,
      { revision, joint, frame_a: frameA, frame_b: frameB },
    );
  }

  smooth(
    id: string,
    revision: number,
    sigma: number,
  ): Promise<AnnotationsResponse> {
    return this.post<AnnotationsResponse>(
      `/clips/${encodeURIComponent(id)}/smooth`,
      { revision, sigma },
    );
  }

  importPredictions(
    id: string,
    revision: number,
    path: string,
    mapping = "coco17",
  ): Promise<AnnotationsResponse> {
    return this.post<AnnotationsResponse>(
      `/clips/${encodeURIComponent(id)}/import-predictions`,
      { revision, path, mapping },
    );
  }

  alignPreview(clipId: string): Promise<PreviewResponse> {
    return this.post<PreviewResponse>("/align/preview", { clip_id: clipId });
  }
}

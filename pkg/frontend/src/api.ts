/**
 * Typed client for the annotation service HTTP API.
 *
 * Every JSON payload carries schema_version; auth is a per-annotator
 * bearer token in the X-Annotation-Token header.  These are the only
 * endpoints the UI ever touches.
 */

export type Answer = "yes" | "no";
export type TaskMode = "labeling" | "consensus";

export interface TaskPayload {
  schema_version: number;
  done: boolean;
  image_id: string;
  class_label: number;
  presentation_order: number;
}

export interface VerdictRequest {
  image_id: string;
  annotator_id: string;
  answer: Answer;
  is_consensus?: boolean;
}

export interface VerdictRecord {
  image_id: string;
  annotator_id: string;
  answer: Answer;
  is_consensus: boolean;
  timestamp: string;
}

export interface VerdictAck {
  schema_version: number;
  accepted: boolean;
  verdict: VerdictRecord;
}

export interface ClassProgress {
  answered: number;
  total: number;
}

export interface AnnotatorProgress {
  answered: number;
  total: number;
  by_class: Record<string, ClassProgress>;
  sub_seed: number;
}

export interface ProgressPayload {
  schema_version: number;
  annotators: Record<string, AnnotatorProgress>;
  disagreements: string[];
  consensus_pending: string[];
}

export interface ExportPayload {
  schema_version: number;
  verdicts: VerdictRecord[];
}

/** Non-2xx response; carries the status and the server's error text. */
export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
  ) {}

  private headers(): Record<string, string> {
    return { "X-Annotation-Token": this.token };
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = `HTTP ${resp.status}`;
      try {
        const body = await resp.json();
        if (typeof body.error === "string") detail = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  /** Next unanswered task for the annotator, or null when done. */
  async getTask(annotator: string, mode: TaskMode): Promise<TaskPayload | null> {
    const query = new URLSearchParams({ annotator, mode });
    const resp = await this.request(`/api/task?${query}`, {
      headers: this.headers(),
    });
    const body = await resp.json();
    return body.done ? null : (body as TaskPayload);
  }

  /** Raw PNG bytes for an image id. */
  async getImage(imageId: string): Promise<ArrayBuffer> {
    const resp = await this.request(`/api/image/${imageId}`, {
      headers: this.headers(),
    });
    return resp.arrayBuffer();
  }

  async postVerdict(verdict: VerdictRequest): Promise<VerdictAck> {
    const resp = await this.request("/api/verdict", {
      method: "POST",
      headers: { ...this.headers(), "Content-Type": "application/json" },
      body: JSON.stringify(verdict),
    });
    return resp.json();
  }

  async getProgress(): Promise<ProgressPayload> {
    const resp = await this.request("/api/progress");
    return resp.json();
  }

  async getExport(): Promise<ExportPayload> {
    const resp = await this.request("/api/export");
    return resp.json();
  }
}

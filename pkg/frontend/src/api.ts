/** Thin typed client over the service HTTP API.
 *
 * The fetch implementation is injected so tests can point the client at a
 * mock server (or simulate network failure) without touching globals.
 */

import {
  ApiError,
  PredictResponse,
  SchemaDoc,
  SessionDoc,
  TasksResponse,
} from "./types.js";

export type Fetcher = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetcher: Fetcher,
  ) {}

  private async request<T>(path: string, init?: Parameters<Fetcher>[1]): Promise<T> {
    let resp: Awaited<ReturnType<Fetcher>>;
    try {
      resp = await this.fetcher(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiRequestError(0, "unreachable", `server unreachable: ${err}`);
    }
    const body = (await resp.json()) as T | ApiError;
    if (resp.status >= 400) {
      const apiErr = body as ApiError;
      const code = apiErr?.error?.code ?? "http_error";
      const message = apiErr?.error?.message ?? `HTTP ${resp.status}`;
      throw new ApiRequestError(resp.status, code, message);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  listTasks(): Promise<TasksResponse> {
    return this.request<TasksResponse>("/api/tasks");
  }

  getSchema(task: string): Promise<SchemaDoc> {
    return this.request<SchemaDoc>(`/api/schema/${encodeURIComponent(task)}`);
  }

  createSession(task: string): Promise<SessionDoc> {
    return this.post<SessionDoc>("/api/session", { task });
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request<SessionDoc>(`/api/session/${encodeURIComponent(sessionId)}`);
  }

  postUtterance(sessionId: string, text: string): Promise<PredictResponse> {
    return this.post<PredictResponse>(
      `/api/session/${encodeURIComponent(sessionId)}/utterance`,
      { text },
    );
  }
}

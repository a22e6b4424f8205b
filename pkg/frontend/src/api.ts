// Thin client over the workbench HTTP API. Every displayed value originates
// from one of these responses; the console computes nothing itself.

import { parseSseStream } from "./sse.js";
import type { DecisionAction, SessionEvent, SessionSummary, SessionTranscript } from "./types.js";

export type FetchLike = typeof fetch;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
    private readonly token: string | null = null,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  async listSessions(): Promise<SessionSummary[]> {
    const response = await this.request("/sessions", { headers: this.headers(false) });
    return (await response.json()) as SessionSummary[];
  }

  async getSession(sessionId: string): Promise<SessionTranscript> {
    const response = await this.request(`/sessions/${encodeURIComponent(sessionId)}`, {
      headers: this.headers(false),
    });
    return (await response.json()) as SessionTranscript;
  }

  async startSession(body: Record<string, unknown>): Promise<{ session_id: string }> {
    const response = await this.request("/sessions", {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    return (await response.json()) as { session_id: string };
  }

  async postDecision(
    sessionId: string,
    action: DecisionAction,
    text = "",
  ): Promise<SessionTranscript> {
    const response = await this.request(`/sessions/${encodeURIComponent(sessionId)}/decision`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ action, text }),
    });
    return (await response.json()) as SessionTranscript;
  }

  async *streamEvents(sessionId: string): AsyncGenerator<SessionEvent> {
    const response = await this.request(`/sessions/${encodeURIComponent(sessionId)}/events`, {
      headers: this.headers(false),
    });
    if (!response.body) return;
    for await (const frame of parseSseStream(response.body)) {
      yield JSON.parse(frame.data) as SessionEvent;
    }
  }

  async listReports(): Promise<string[]> {
    const response = await this.request("/reports", { headers: this.headers(false) });
    return (await response.json()) as string[];
  }

  async fetchReport(name: string): Promise<string> {
    const response = await this.request(`/reports/${encodeURIComponent(name)}`, {
      headers: this.headers(false),
    });
    return await response.text();
  }
}

// Thin fetch client for the reflection service.  Every non-2xx response
// becomes an ApiError carrying the HTTP status and the service's machine
// code, so callers can branch on e.g. 409/"session_finalized" without
// string-matching messages.

import type {
  ErrorBody,
  ModelSummary,
  SessionBody,
  WhatifResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly stage: string | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function asError(resp: Response): Promise<ApiError> {
  let body: Partial<ErrorBody> = {};
  try {
    body = (await resp.json()) as ErrorBody;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return new ApiError(
    resp.status,
    body.error ?? "error",
    body.message ?? `${resp.status} ${resp.statusText}`,
    body.stage ?? null,
  );
}

export class ConsoleApi {
  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, payload?: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: payload === undefined ? {} : { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    if (!resp.ok) throw await asError(resp);
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  async models(): Promise<ModelSummary[]> {
    const body = await this.request<{ models: ModelSummary[] }>("GET", "/models");
    return body.models;
  }

  createSession(
    model: string,
    caseRef: { case_name: string } | { case: Record<string, unknown> },
    overrides?: Record<string, unknown>,
  ): Promise<SessionBody> {
    const payload: Record<string, unknown> = { model, ...caseRef };
    if (overrides) payload.overrides = overrides;
    return this.request("POST", "/sessions", payload);
  }

  getSession(sessionId: string): Promise<SessionBody> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  answer(sessionId: string, questionIndex: number, text: string): Promise<SessionBody> {
    return this.request("POST", `/sessions/${sessionId}/answers`, {
      question_index: questionIndex,
      text,
    });
  }

  whatif(sessionId: string, changes: Record<string, number | string>): Promise<WhatifResponse> {
    return this.request("POST", `/sessions/${sessionId}/whatif`, { changes });
  }

  decide(sessionId: string, chosen: string, rationale: string): Promise<SessionBody> {
    return this.request("POST", `/sessions/${sessionId}/decision`, { chosen, rationale });
  }

  auditUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/audit`;
  }

  async audit(sessionId: string): Promise<string> {
    const resp = await fetch(this.auditUrl(sessionId));
    if (!resp.ok) throw await asError(resp);
    return resp.text();
  }
}

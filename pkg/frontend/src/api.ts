// Typed client for the companion service HTTP API.  All views go through
// this; nothing in the UI computes dialogue state on its own.

export interface Turn {
  speaker: "AGENT" | "USER";
  text: string;
  at: number;
  question_id: string | null;
}

export interface SessionRecord {
  session_id: string;
  doc_id: string;
  bank_id: string;
  created_at: number;
  budget_seconds: number;
  status: "ACTIVE" | "ENDED";
  phase: string;
  turn_count: number;
  has_survey: boolean;
}

export interface EventResult {
  utterances: string[];
  turns: Turn[];
  phase: string;
}

export interface TranscriptPayload {
  session_id: string;
  phase: string;
  turns: Turn[];
}

export interface SummaryRow {
  statement_id: string;
  statement: string;
  session: number;
  n: number;
  mode: number;
  median: number;
  mean: number;
  ci95_halfwidth: number | null;
  t: number | null;
  p: number | null;
  degenerate: boolean;
  ci_display: string;
  p_display: string;
}

export interface SummaryPayload {
  rows: SummaryRow[];
  tsv: string;
  table: string;
  statements: Record<string, string>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    const payload = text ? JSON.parse(text) : null;
    if (!resp.ok) {
      const err = (payload ?? {}) as Partial<ApiErrorBody>;
      throw new ApiError(resp.status, err.code ?? "unknown", err.message ?? resp.statusText);
    }
    return payload as T;
  }

  createSession(docId: string, budgetSeconds?: number): Promise<SessionRecord> {
    return this.request("POST", "/sessions", {
      doc_id: docId,
      budget_seconds: budgetSeconds ?? null,
    });
  }

  getSession(sessionId: string): Promise<SessionRecord> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  listSessions(): Promise<SessionRecord[]> {
    return this.request("GET", "/sessions");
  }

  postEvent(sessionId: string, event: string, text?: string): Promise<EventResult> {
    return this.request("POST", `/sessions/${sessionId}/utterances`, {
      event,
      text: text ?? null,
    });
  }

  sendUtterance(sessionId: string, text: string): Promise<EventResult> {
    return this.postEvent(sessionId, "UTTERANCE", text);
  }

  transcript(sessionId: string): Promise<TranscriptPayload> {
    return this.request("GET", `/sessions/${sessionId}/transcript`);
  }

  statements(): Promise<Record<string, string>> {
    return this.request<{ statements: Record<string, string> }>("GET", "/surveys/statements")
      .then((p) => p.statements);
  }

  submitSurvey(
    sessionId: string,
    participantId: string,
    sessionNumber: number,
    ratings: Record<string, number>,
  ): Promise<unknown> {
    return this.request("POST", `/sessions/${sessionId}/survey`, {
      participant_id: participantId,
      session_number: sessionNumber,
      ratings,
    });
  }

  summary(): Promise<SummaryPayload> {
    return this.request("GET", "/surveys/summary");
  }

  streamUrl(sessionId: string): string {
    const base = this.baseUrl || (typeof location !== "undefined" ? location.origin : "");
    return base.replace(/^http/, "ws") + `/sessions/${sessionId}/stream`;
  }
}

/** Typed client for the tutoring engine's HTTP API. Pure pass-through:
 * no retries, no caching, no client-side interpretation of text. */

export type Mode = "minimal" | "cluster" | "full";

export type DiagnosisKind =
  | "Missing"
  | "Excess"
  | "CorrectRelation"
  | "IncorrectRelation"
  | "AlreadyCorrect"
  | "NoMatch";

export interface ExerciseSummary {
  id: string;
  prompt: string;
}

export interface ExerciseDetail extends ExerciseSummary {
  reference_count: number;
  student_count: number;
  node_count: number;
  edge_count: number;
}

export interface SessionInfo {
  session_id: string;
  exercise_id: string;
  mode: Mode;
}

export interface Diagnosis {
  kind: DiagnosisKind;
  detail: string | null;
  affected: Record<string, unknown>[];
}

export interface EduSpan {
  text: string;
  char_start: number;
  char_end: number;
  cluster: number;
}

export interface Candidate {
  text: string;
  score: number;
}

export interface SearchTrace {
  iterations: number;
  candidates_scored: number;
  top_score: number;
  scored_bound: number;
}

export interface Diagnostics {
  mode: Mode;
  alpha: number;
  edus: EduSpan[];
  trace: SearchTrace;
  candidates: Candidate[];
}

export interface Feedback {
  diagnosis: Diagnosis;
  correct_edus: string[];
  message: string;
  diagnostics: Diagnostics;
}

export interface AttemptRecord {
  text: string;
  feedback: Feedback;
}

export interface SessionTranscript {
  session_id: string;
  exercise_id: string;
  mode: Mode;
  attempts: AttemptRecord[];
}

/** The service answered with a non-2xx status. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

/** The service could not be reached at all. */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(cause instanceof Error ? cause.message : String(cause));
    this.name = "NetworkError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function extractDetail(body: unknown, status: number): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return detail;
    if (Array.isArray(detail)) {
      const msgs = detail
        .map((d) => (d && typeof d === "object" && "msg" in d ? String((d as { msg: unknown }).msg) : ""))
        .filter(Boolean);
      if (msgs.length) return msgs.join("; ");
    }
  }
  return `request failed with status ${status}`;
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    // bind lazily so a browser's window.fetch keeps its receiver
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new NetworkError(cause);
    }
    let doc: unknown = null;
    try {
      doc = await response.json();
    } catch {
      // non-JSON body; fall through to the status check
    }
    if (!response.ok) {
      throw new ApiError(response.status, extractDetail(doc, response.status));
    }
    return doc as T;
  }

  async listExercises(): Promise<ExerciseSummary[]> {
    const doc = await this.request<{ exercises: ExerciseSummary[] }>("GET", "/exercises");
    return doc.exercises;
  }

  getExercise(id: string): Promise<ExerciseDetail> {
    return this.request<ExerciseDetail>("GET", `/exercises/${encodeURIComponent(id)}`);
  }

  createSession(exerciseId: string, mode: Mode): Promise<SessionInfo> {
    return this.request<SessionInfo>("POST", "/sessions", { exercise_id: exerciseId, mode });
  }

  submitAttempt(sessionId: string, text: string): Promise<Feedback> {
    return this.request<Feedback>("POST", `/sessions/${encodeURIComponent(sessionId)}/attempts`, {
      text,
    });
  }

  getSession(sessionId: string): Promise<SessionTranscript> {
    return this.request<SessionTranscript>("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }
}

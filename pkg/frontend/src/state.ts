/** Session view state as a pure projection of API responses.
 *
 * Turns are only appended from successful API data, so rebuilding the
 * state from GET /sessions/{id} reproduces the live transcript
 * exactly. Failed submissions change banners, never the transcript.
 */

import type { Feedback, SessionInfo, SessionTranscript } from "./api.js";
import { ApiError, NetworkError } from "./api.js";

export type Author = "system" | "student";

export interface ChatTurn {
  author: Author;
  text: string;
  // feedback attaches only to system turns
  feedback?: Feedback;
}

// ready: input open; awaiting: one attempt in flight, input locked;
// done: AlreadyCorrect reached, session over
export type Phase = "idle" | "ready" | "awaiting" | "done";

export interface SessionViewState {
  session: SessionInfo | null;
  prompt: string;
  turns: ChatTurn[];
  phase: Phase;
  pendingText: string | null;
  banner: string | null;
  inlineError: string | null;
}

export function initialState(): SessionViewState {
  return {
    session: null,
    prompt: "",
    turns: [],
    phase: "idle",
    pendingText: null,
    banner: null,
    inlineError: null,
  };
}

export function sessionStarted(
  state: SessionViewState,
  session: SessionInfo,
  prompt: string,
): SessionViewState {
  return {
    ...initialState(),
    session,
    prompt,
    turns: [{ author: "system", text: prompt }],
    phase: "ready",
  };
}

export function canSubmit(state: SessionViewState, text: string): boolean {
  return state.phase === "ready" && text.trim().length > 0;
}

export function attemptSubmitted(state: SessionViewState, text: string): SessionViewState {
  if (state.phase !== "ready") {
    return state;
  }
  return { ...state, phase: "awaiting", pendingText: text, banner: null, inlineError: null };
}

function turnsForAttempt(text: string, feedback: Feedback): ChatTurn[] {
  return [
    { author: "student", text },
    { author: "system", text: feedback.message, feedback },
  ];
}

export function feedbackReceived(
  state: SessionViewState,
  text: string,
  feedback: Feedback,
): SessionViewState {
  return {
    ...state,
    turns: [...state.turns, ...turnsForAttempt(text, feedback)],
    phase: feedback.diagnosis.kind === "AlreadyCorrect" ? "done" : "ready",
    pendingText: null,
    banner: null,
    inlineError: null,
  };
}

export function attemptFailed(state: SessionViewState, error: unknown): SessionViewState {
  const base = { ...state, phase: "ready" as Phase, pendingText: null };
  if (error instanceof ApiError && error.status === 422) {
    return { ...base, inlineError: error.message };
  }
  if (error instanceof NetworkError) {
    return { ...base, banner: "Cannot reach the tutoring engine. Check it is running, then retry." };
  }
  if (error instanceof ApiError) {
    return { ...base, banner: error.message };
  }
  return { ...base, banner: String(error) };
}

export function sessionStartFailed(state: SessionViewState, error: unknown): SessionViewState {
  if (error instanceof ApiError && error.status === 404) {
    return { ...initialState(), banner: "Exercise not found. Pick another one." };
  }
  if (error instanceof NetworkError) {
    return {
      ...initialState(),
      banner: "Cannot reach the tutoring engine. Check it is running, then retry.",
    };
  }
  return { ...initialState(), banner: error instanceof Error ? error.message : String(error) };
}

/** Rebuild the whole view from a stored transcript. */
export function replaySession(
  session: SessionInfo,
  prompt: string,
  transcript: SessionTranscript,
): SessionViewState {
  const turns: ChatTurn[] = [{ author: "system", text: prompt }];
  for (const attempt of transcript.attempts) {
    turns.push(...turnsForAttempt(attempt.text, attempt.feedback));
  }
  const last = transcript.attempts[transcript.attempts.length - 1];
  return {
    ...initialState(),
    session,
    prompt,
    turns,
    phase: last && last.feedback.diagnosis.kind === "AlreadyCorrect" ? "done" : "ready",
  };
}

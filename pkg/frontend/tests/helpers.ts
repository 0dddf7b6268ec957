import type { Diagnosis, Diagnostics, Feedback } from "../src/api.js";

export function makeDiagnostics(overrides: Partial<Diagnostics> = {}): Diagnostics {
  return {
    mode: "full",
    alpha: 0.95,
    edus: [],
    trace: { iterations: 1, candidates_scored: 3, top_score: 0.9, scored_bound: 40 },
    candidates: [],
    ...overrides,
  };
}

export function makeFeedback(
  overrides: Partial<Feedback> & { diagnosis?: Partial<Diagnosis> } = {},
): Feedback {
  const { diagnosis, diagnostics, ...rest } = overrides;
  return {
    diagnosis: { kind: "Missing", detail: "Contingency", affected: [], ...diagnosis },
    correct_edus: [],
    message: "message",
    diagnostics: diagnostics ?? makeDiagnostics(),
    ...rest,
  };
}

import type { Diagnosis } from "./api.js";

// plain-language names for the relation a missing concept hangs on
const RELATION_WORDS: Record<string, string> = {
  Contingency: "reason",
  Temporal: "sequence",
  Comparison: "contrast",
  Expansion: "detail",
};

export function diagnosisBadge(diagnosis: Diagnosis): string {
  switch (diagnosis.kind) {
    case "Missing":
      return `missing ${RELATION_WORDS[diagnosis.detail ?? ""] ?? "concept"}`;
    case "Excess":
      return "extra concept";
    case "CorrectRelation":
      return "connection confirmed";
    case "IncorrectRelation":
      return "wrong connection";
    case "AlreadyCorrect":
      return "correct";
    case "NoMatch":
      return "no match";
  }
}

export function badgeClass(diagnosis: Diagnosis): string {
  return `badge badge-${diagnosis.kind.toLowerCase()}`;
}

/** DOM rendering. Every function projects state into a container; no
 * view code mutates state or talks to the network. Student text is
 * built with text nodes only, never markup injection. */

import type { Candidate, Diagnostics, Feedback } from "./api.js";
import { badgeClass, diagnosisBadge } from "./badges.js";
import type { ChatTurn, SessionViewState } from "./state.js";

/** Split a student answer around the echoed-correct substrings.
 * Non-overlapping, first occurrence wins, scanned left to right. */
export function highlightSegments(
  text: string,
  correctEdus: string[],
): { text: string; correct: boolean }[] {
  const spans: { start: number; end: number }[] = [];
  for (const edu of correctEdus) {
    if (!edu) continue;
    let from = 0;
    while (from <= text.length) {
      const at = text.indexOf(edu, from);
      if (at < 0) break;
      const overlaps = spans.some((s) => at < s.end && at + edu.length > s.start);
      if (!overlaps) {
        spans.push({ start: at, end: at + edu.length });
        break;
      }
      from = at + 1;
    }
  }
  spans.sort((a, b) => a.start - b.start);
  const out: { text: string; correct: boolean }[] = [];
  let pos = 0;
  for (const span of spans) {
    if (span.start > pos) out.push({ text: text.slice(pos, span.start), correct: false });
    out.push({ text: text.slice(span.start, span.end), correct: true });
    pos = span.end;
  }
  if (pos < text.length) out.push({ text: text.slice(pos), correct: false });
  return out;
}

function renderStudentTurn(turn: ChatTurn, correctEdus: string[]): HTMLElement {
  const el = document.createElement("div");
  el.className = "turn student";
  for (const segment of highlightSegments(turn.text, correctEdus)) {
    if (segment.correct) {
      const mark = document.createElement("mark");
      mark.className = "correct-edu";
      mark.textContent = segment.text;
      el.appendChild(mark);
    } else {
      el.appendChild(document.createTextNode(segment.text));
    }
  }
  return el;
}

function renderSystemTurn(turn: ChatTurn, onInspect: (feedback: Feedback) => void): HTMLElement {
  const el = document.createElement("div");
  el.className = "turn system";
  const body = document.createElement("span");
  body.className = "turn-text";
  body.textContent = turn.text;
  el.appendChild(body);
  if (turn.feedback) {
    const badge = document.createElement("span");
    badge.className = badgeClass(turn.feedback.diagnosis);
    badge.textContent = diagnosisBadge(turn.feedback.diagnosis);
    el.appendChild(badge);

    const feedback = turn.feedback;
    const inspect = document.createElement("button");
    inspect.type = "button";
    inspect.className = "inspect";
    inspect.textContent = "inspect";
    inspect.addEventListener("click", () => onInspect(feedback));
    el.appendChild(inspect);
  }
  return el;
}

export function renderTurns(
  container: HTMLElement,
  state: SessionViewState,
  onInspect: (feedback: Feedback) => void,
): void {
  container.replaceChildren();
  state.turns.forEach((turn, i) => {
    if (turn.author === "student") {
      // the feedback that judged this turn is the system turn after it
      const next = state.turns[i + 1];
      container.appendChild(renderStudentTurn(turn, next?.feedback?.correct_edus ?? []));
    } else {
      container.appendChild(renderSystemTurn(turn, onInspect));
    }
  });
  if (state.phase === "awaiting" && state.pendingText !== null) {
    const ghost = document.createElement("div");
    ghost.className = "turn student pending";
    ghost.textContent = state.pendingText;
    container.appendChild(ghost);
  }
}

function renderCandidateRow(candidate: Candidate): HTMLElement {
  const row = document.createElement("li");
  row.className = "candidate";
  const label = document.createElement("span");
  label.className = "candidate-text";
  label.textContent = candidate.text;
  const meter = document.createElement("span");
  meter.className = "score-bar";
  const fill = document.createElement("span");
  fill.className = "score-fill";
  fill.style.width = `${Math.round(Math.max(0, Math.min(1, candidate.score)) * 100)}%`;
  meter.appendChild(fill);
  const value = document.createElement("span");
  value.className = "score-value";
  value.textContent = candidate.score.toFixed(3);
  row.append(label, meter, value);
  return row;
}

export function renderDiagnostics(panel: HTMLElement, diagnostics: Diagnostics): void {
  panel.replaceChildren();
  panel.classList.add("open");

  const spans = document.createElement("div");
  spans.className = "edu-spans";
  for (const edu of diagnostics.edus) {
    const chip = document.createElement("span");
    chip.className = edu.cluster === -1 ? "chip outlier" : "chip";
    chip.textContent = edu.text;
    chip.title =
      edu.cluster === -1
        ? `chars ${edu.char_start}-${edu.char_end}, no cluster`
        : `chars ${edu.char_start}-${edu.char_end}, cluster ${edu.cluster}`;
    spans.appendChild(chip);
  }
  panel.appendChild(spans);

  const list = document.createElement("ol");
  list.className = "candidates";
  // defensive: the API sends them ranked, keep the promise locally too
  const ranked = [...diagnostics.candidates].sort((a, b) => b.score - a.score);
  for (const candidate of ranked) {
    list.appendChild(renderCandidateRow(candidate));
  }
  panel.appendChild(list);

  const threshold = document.createElement("div");
  threshold.className = "threshold";
  threshold.style.left = `${Math.round(diagnostics.alpha * 100)}%`;
  threshold.textContent = `accept at ${diagnostics.alpha}`;
  panel.appendChild(threshold);

  const trace = document.createElement("p");
  trace.className = "trace";
  trace.textContent =
    `${diagnostics.mode} mode: ${diagnostics.trace.iterations} iteration(s), ` +
    `${diagnostics.trace.candidates_scored} candidate(s) scored, ` +
    `best ${diagnostics.trace.top_score.toFixed(3)}`;
  panel.appendChild(trace);
}

export function renderBanner(el: HTMLElement, state: SessionViewState, onRetry: () => void): void {
  el.replaceChildren();
  if (!state.banner) {
    el.classList.remove("visible");
    return;
  }
  el.classList.add("visible");
  const text = document.createElement("span");
  text.textContent = state.banner;
  el.appendChild(text);
  const retry = document.createElement("button");
  retry.type = "button";
  retry.className = "retry";
  retry.textContent = "retry";
  retry.addEventListener("click", onRetry);
  el.appendChild(retry);
}

export function renderComposer(
  form: HTMLFormElement,
  input: HTMLTextAreaElement,
  submit: HTMLButtonElement,
  errorEl: HTMLElement,
  state: SessionViewState,
): void {
  const locked = state.phase !== "ready";
  input.disabled = locked;
  submit.disabled = locked;
  errorEl.textContent = state.inlineError ?? "";
  form.classList.toggle("celebrate", state.phase === "done");
  submit.textContent = state.phase === "done" ? "solved!" : "send";
  if (!locked) {
    input.focus();
  }
}

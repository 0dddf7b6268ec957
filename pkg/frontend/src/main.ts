import { ApiClient, type Feedback, type Mode } from "./api.js";
import {
  attemptFailed,
  attemptSubmitted,
  canSubmit,
  feedbackReceived,
  initialState,
  replaySession,
  sessionStartFailed,
  sessionStarted,
  type SessionViewState,
} from "./state.js";
import { renderBanner, renderComposer, renderDiagnostics, renderTurns } from "./view.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function boot(api: ApiClient = new ApiClient("/api")): void {
  const exerciseSelect = byId<HTMLSelectElement>("exercise");
  const modeSelect = byId<HTMLSelectElement>("mode");
  const transcript = byId<HTMLElement>("transcript");
  const banner = byId<HTMLElement>("banner");
  const panel = byId<HTMLElement>("diagnostics");
  const form = byId<HTMLFormElement>("composer");
  const input = byId<HTMLTextAreaElement>("attempt");
  const submit = byId<HTMLButtonElement>("send");
  const inlineError = byId<HTMLElement>("attempt-error");
  const reloadButton = byId<HTMLButtonElement>("reload");

  let state: SessionViewState = initialState();
  let prompts = new Map<string, string>();

  const paint = () => {
    renderTurns(transcript, state, (feedback: Feedback) =>
      renderDiagnostics(panel, feedback.diagnostics),
    );
    renderBanner(banner, state, startSession);
    renderComposer(form, input, submit, inlineError, state);
  };

  const update = (next: SessionViewState) => {
    state = next;
    paint();
  };

  async function loadExercises(): Promise<void> {
    try {
      const exercises = await api.listExercises();
      prompts = new Map(exercises.map((e) => [e.id, e.prompt]));
      exerciseSelect.replaceChildren(
        ...exercises.map((e) => {
          const option = document.createElement("option");
          option.value = e.id;
          option.textContent = e.id;
          return option;
        }),
      );
      await startSession();
    } catch (error) {
      update(sessionStartFailed(state, error));
    }
  }

  async function startSession(): Promise<void> {
    const exerciseId = exerciseSelect.value;
    if (!exerciseId) return;
    panel.replaceChildren();
    panel.classList.remove("open");
    try {
      const session = await api.createSession(exerciseId, modeSelect.value as Mode);
      update(sessionStarted(state, session, prompts.get(exerciseId) ?? exerciseId));
    } catch (error) {
      update(sessionStartFailed(state, error));
    }
  }

  async function reloadTranscript(): Promise<void> {
    if (!state.session) return;
    try {
      const stored = await api.getSession(state.session.session_id);
      update(replaySession(state.session, state.prompt, stored));
    } catch (error) {
      update(attemptFailed(state, error));
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value;
    if (!state.session || !canSubmit(state, text)) return;
    const session = state.session;
    update(attemptSubmitted(state, text));
    api
      .submitAttempt(session.session_id, text)
      .then((feedback) => {
        input.value = "";
        update(feedbackReceived(state, text, feedback));
      })
      .catch((error) => update(attemptFailed(state, error)));
  });

  exerciseSelect.addEventListener("change", startSession);
  modeSelect.addEventListener("change", startSession);
  reloadButton.addEventListener("click", reloadTranscript);

  paint();
  void loadExercises();
}

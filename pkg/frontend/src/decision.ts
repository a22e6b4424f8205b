// The human gate: Approve, Override feedback, Inject hypothesis. Buttons
// disable on submit until the response lands (idempotent from the UI side);
// a 409 means another client decided first, so the view refreshes.

import { ApiClient, ApiError } from "./api.js";
import type { SessionTranscript } from "./types.js";

export interface DecisionCallbacks {
  onApplied: (transcript: SessionTranscript) => void;
  onConflict: () => void;
}

export function renderDecisionPanel(
  container: HTMLElement,
  api: ApiClient,
  sessionId: string,
  callbacks: DecisionCallbacks,
): void {
  container.replaceChildren();
  const panel = document.createElement("div");
  panel.className = "decision-panel";

  const notice = document.createElement("p");
  notice.className = "decision-notice";

  const approve = button("Approve", "approve-button");
  const overrideText = textArea("override-text", "Feedback for the Scientist");
  const override = button("Override feedback", "override-button");
  const injectText = textArea("inject-text", "Replacement hypothesis");
  const inject = button("Inject hypothesis", "inject-button");

  override.disabled = true;
  inject.disabled = true;
  overrideText.addEventListener("input", () => {
    override.disabled = overrideText.value.trim() === "";
  });
  injectText.addEventListener("input", () => {
    inject.disabled = injectText.value.trim() === "";
  });

  const buttons = [approve, override, inject];
  const submit = async (action: "approve" | "override_feedback" | "inject_hypothesis",
                        text: string) => {
    for (const b of buttons) b.disabled = true;
    try {
      const transcript = await api.postDecision(sessionId, action, text);
      callbacks.onApplied(transcript);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        notice.textContent = "Session moved on: another decision was applied first.";
        callbacks.onConflict();
      } else {
        notice.textContent = error instanceof Error ? error.message : String(error);
        approve.disabled = false;
        override.disabled = overrideText.value.trim() === "";
        inject.disabled = injectText.value.trim() === "";
      }
    }
  };

  approve.addEventListener("click", () => void submit("approve", ""));
  override.addEventListener("click", () => void submit("override_feedback", overrideText.value.trim()));
  inject.addEventListener("click", () => void submit("inject_hypothesis", injectText.value.trim()));

  panel.append(approve, overrideText, override, injectText, inject, notice);
  container.appendChild(panel);
}

function button(label: string, className: string): HTMLButtonElement {
  const el = document.createElement("button");
  el.textContent = label;
  el.className = className;
  return el;
}

function textArea(className: string, placeholder: string): HTMLTextAreaElement {
  const el = document.createElement("textarea");
  el.className = className;
  el.placeholder = placeholder;
  return el;
}

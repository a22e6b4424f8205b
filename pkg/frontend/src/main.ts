// Hash-routed single-page console: #/ dashboard, #/session/{id}, #/reports.
// Served as static files by the workbench service; talks only to its API.

import { ApiClient } from "./api.js";
import { renderConnectionBanner, renderDashboard } from "./dashboard.js";
import { renderDecisionPanel } from "./decision.js";
import { renderReports } from "./reports.js";
import { TranscriptView } from "./transcript.js";

const api = new ApiClient("");
const root = document.getElementById("app") ?? document.body;
let activeStream: AbortController | null = null;

async function showDashboard(): Promise<void> {
  stopStream();
  try {
    const sessions = await api.listSessions();
    renderDashboard(root, sessions, (id) => {
      location.hash = `#/session/${encodeURIComponent(id)}`;
    });
  } catch {
    renderConnectionBanner(root, "Cannot reach the workbench service.", () => {
      void showDashboard();
    });
  }
}

async function showSession(sessionId: string): Promise<void> {
  stopStream();
  root.replaceChildren();
  const transcriptHost = document.createElement("div");
  const decisionHost = document.createElement("div");
  root.append(transcriptHost, decisionHost);

  const view = new TranscriptView(transcriptHost);
  const transcript = await api.getSession(sessionId);
  view.renderFull(transcript);

  const refreshDecision = (status: string) => {
    decisionHost.replaceChildren();
    if (status === "awaiting_human") {
      renderDecisionPanel(decisionHost, api, sessionId, {
        onApplied: (updated) => {
          view.renderFull(updated);
          refreshDecision(updated.status);
        },
        onConflict: () => {
          void showSession(sessionId);
        },
      });
    }
  };
  refreshDecision(transcript.status);

  if (transcript.status === "running" || transcript.status === "awaiting_human") {
    const controller = new AbortController();
    activeStream = controller;
    const seen = transcript.turns.length;
    void followEvents(sessionId, view, seen, refreshDecision, controller.signal);
  }
}

async function followEvents(
  sessionId: string,
  view: TranscriptView,
  alreadyRendered: number,
  refreshDecision: (status: string) => void,
  signal: AbortSignal,
): Promise<void> {
  let turnIndex = 0;
  try {
    for await (const event of api.streamEvents(sessionId)) {
      if (signal.aborted) return;
      if (event.type === "turn") {
        turnIndex += 1;
        if (turnIndex <= alreadyRendered) continue; // already in the full render
      }
      view.applyEvent(event);
      if (event.type === "awaiting") refreshDecision("awaiting_human");
      if (event.type === "finished") refreshDecision(String(event.status ?? ""));
    }
  } catch {
    // stream dropped; the next navigation re-fetches the transcript
  }
}

function stopStream(): void {
  activeStream?.abort();
  activeStream = null;
}

async function route(): Promise<void> {
  const hash = location.hash || "#/";
  const session = hash.match(/^#\/session\/(.+)$/);
  if (session) {
    await showSession(decodeURIComponent(session[1]!));
    return;
  }
  if (hash === "#/reports") {
    stopStream();
    await renderReports(root, api);
    return;
  }
  await showDashboard();
}

window.addEventListener("hashchange", () => void route());
void route();

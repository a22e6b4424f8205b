// Session list: awaiting_human sessions sort first, then by id for stability.

import type { SessionSummary } from "./types.js";

export function sortSessions(sessions: SessionSummary[]): SessionSummary[] {
  return [...sessions].sort((a, b) => {
    const aAwaiting = a.status === "awaiting_human" ? 0 : 1;
    const bAwaiting = b.status === "awaiting_human" ? 0 : 1;
    if (aAwaiting !== bAwaiting) return aAwaiting - bAwaiting;
    return a.session_id.localeCompare(b.session_id);
  });
}

export function renderDashboard(
  container: HTMLElement,
  sessions: SessionSummary[],
  onOpen: (sessionId: string) => void,
): void {
  container.replaceChildren();
  if (sessions.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No sessions yet. Start one from the CLI or the API.";
    container.appendChild(empty);
    return;
  }
  const list = document.createElement("ul");
  list.className = "session-list";
  for (const session of sortSessions(sessions)) {
    const item = document.createElement("li");
    item.dataset.sessionId = session.session_id;
    item.dataset.status = session.status;

    const badge = document.createElement("span");
    badge.className = `badge badge-${session.status}`;
    badge.textContent = session.status;

    const link = document.createElement("a");
    link.href = `#/session/${encodeURIComponent(session.session_id)}`;
    link.textContent = session.session_id;
    link.addEventListener("click", (event) => {
      event.preventDefault();
      onOpen(session.session_id);
    });

    const summary = document.createElement("span");
    summary.className = "session-summary";
    summary.textContent = ` ${session.background} (${session.turn_count} turns)`;

    item.append(badge, " ", link, summary);
    list.appendChild(item);
  }
  container.appendChild(list);
}

export function renderConnectionBanner(container: HTMLElement, message: string,
                                       onRetry: () => void): void {
  const banner = document.createElement("div");
  banner.className = "banner banner-error";
  banner.textContent = message + " ";
  const retry = document.createElement("button");
  retry.textContent = "Retry";
  retry.addEventListener("click", () => {
    banner.remove();
    onRetry();
  });
  banner.appendChild(retry);
  container.prepend(banner);
}

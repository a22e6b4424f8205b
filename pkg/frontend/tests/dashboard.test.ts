// Dashboard: awaiting-first ordering and empty state, against the fixture API.

import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { renderDashboard, sortSessions } from "../src/dashboard.js";
import type { SessionSummary } from "../src/types.js";
import { makeTranscript, startFixtureServer, type FixtureServer } from "./fixture-server.js";

let server: FixtureServer | undefined;

afterEach(async () => {
  if (server) await server.close();
  server = undefined;
});

beforeEach(() => {
  document.body.innerHTML = "<main id='app'></main>";
});

function summaries(sessions: { id: string; status: SessionSummary["status"] }[]): SessionSummary[] {
  return sessions.map(({ id, status }) => ({
    session_id: id,
    status,
    background: "bg",
    turn_count: 4,
    final_hypothesis: "",
  }));
}

describe("session sorting", () => {
  it("puts awaiting_human sessions first", () => {
    const sorted = sortSessions(
      summaries([
        { id: "s-accepted", status: "accepted" },
        { id: "s-awaiting", status: "awaiting_human" },
        { id: "s-running", status: "running" },
      ]),
    );
    expect(sorted[0]!.session_id).toBe("s-awaiting");
    expect(sorted.map((s) => s.session_id)).toEqual(["s-awaiting", "s-accepted", "s-running"]);
  });

  it("does not mutate its input", () => {
    const input = summaries([
      { id: "b", status: "accepted" },
      { id: "a", status: "running" },
    ]);
    sortSessions(input);
    expect(input.map((s) => s.session_id)).toEqual(["b", "a"]);
  });
});

describe("dashboard rendering from the fixture server", () => {
  it("lists three sessions with the awaiting one first", async () => {
    server = await startFixtureServer([
      { transcript: makeTranscript({ session_id: "s-running", status: "running" }), events: [] },
      { transcript: makeTranscript({ session_id: "s-awaiting", status: "awaiting_human" }), events: [] },
      { transcript: makeTranscript({ session_id: "s-accepted", status: "accepted" }), events: [] },
    ]);
    const api = new ApiClient(server.url);
    const container = document.getElementById("app")!;
    renderDashboard(container, await api.listSessions(), () => {});

    const items = [...container.querySelectorAll("li")];
    expect(items).toHaveLength(3);
    expect(items[0]!.dataset.sessionId).toBe("s-awaiting");
    expect(items[0]!.querySelector(".badge")!.textContent).toBe("awaiting_human");
  });

  it("renders the empty state for zero sessions", async () => {
    server = await startFixtureServer([]);
    const api = new ApiClient(server.url);
    const container = document.getElementById("app")!;
    renderDashboard(container, await api.listSessions(), () => {});
    expect(container.querySelector(".empty-state")).not.toBeNull();
    expect(container.querySelectorAll("li")).toHaveLength(0);
  });
});

describe("thin-client rule", () => {
  it("every displayed value originates from the service response", async () => {
    // Mocked network layer: the fetch stub is the only data source.
    const payload: SessionSummary[] = [
      {
        session_id: "only-from-server",
        status: "awaiting_human",
        background: "server-provided background",
        turn_count: 7,
        final_hypothesis: "server-provided claim",
      },
    ];
    const stubFetch: typeof fetch = async () =>
      new Response(JSON.stringify(payload), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      });
    const api = new ApiClient("http://nowhere.invalid", stubFetch);
    const sessions = await api.listSessions();
    const container = document.getElementById("app")!;
    renderDashboard(container, sessions, () => {});

    const text = container.textContent ?? "";
    expect(text).toContain("only-from-server");
    expect(text).toContain("server-provided background");
    expect(text).toContain("7 turns");
    // Nothing rendered beyond what the payload carries: no computed scores.
    const item = container.querySelector("li")!;
    expect(item.dataset.status).toBe("awaiting_human");
  });
});

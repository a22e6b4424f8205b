// Transcript view: renders the turns delivered by the server, in server
// order, and appends new turns from the event stream without a full reload.

import type { SessionEvent, SessionTranscript, Turn } from "./types.js";

export class TranscriptView {
  private readonly list: HTMLOListElement;
  private readonly statusLine: HTMLElement;
  private readonly finalLine: HTMLElement;

  constructor(private readonly container: HTMLElement) {
    this.statusLine = document.createElement("p");
    this.statusLine.className = "session-status";
    this.list = document.createElement("ol");
    this.list.className = "turns";
    this.finalLine = document.createElement("p");
    this.finalLine.className = "final-hypothesis";
    container.replaceChildren(this.statusLine, this.list, this.finalLine);
  }

  renderFull(transcript: SessionTranscript): void {
    this.list.replaceChildren();
    for (const turn of transcript.turns) this.appendTurn(turn);
    this.setStatus(transcript.status);
    this.setFinal(transcript.final_hypothesis);
  }

  appendTurn(turn: Turn): void {
    const item = document.createElement("li");
    item.dataset.role = turn.role;
    const role = document.createElement("strong");
    role.textContent = turn.role;
    const output = document.createElement("span");
    output.textContent = `: ${turn.output}`;
    item.append(role, output);
    this.list.appendChild(item);
  }

  setStatus(status: string): void {
    this.statusLine.textContent = `status: ${status}`;
    this.statusLine.dataset.status = status;
  }

  setFinal(finalHypothesis: string): void {
    this.finalLine.textContent = finalHypothesis ? `final: ${finalHypothesis}` : "";
  }

  turnCount(): number {
    return this.list.children.length;
  }

  applyEvent(event: SessionEvent): void {
    switch (event.type) {
      case "turn":
        this.appendTurn({
          role: String(event.role ?? ""),
          input_digest: String(event.input_digest ?? ""),
          output: String(event.output ?? ""),
        });
        break;
      case "awaiting":
        this.setStatus("awaiting_human");
        break;
      case "finished":
        this.setStatus(String(event.status ?? "finished"));
        this.setFinal(String(event.final_hypothesis ?? ""));
        break;
      default:
        break; // started / verdict / human events carry no transcript rows of their own
    }
  }
}

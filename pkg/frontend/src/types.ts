export type SessionStatus = "running" | "awaiting_human" | "accepted" | "exhausted" | "failed";

export interface SessionSummary {
  session_id: string;
  status: SessionStatus;
  background: string;
  turn_count: number;
  final_hypothesis: string;
}

export interface Turn {
  role: string;
  input_digest: string;
  output: string;
}

export interface Verdict {
  decision: string;
  feedback: string;
}

export interface SessionTranscript {
  session_id: string;
  background: string;
  config: Record<string, unknown>;
  turns: Turn[];
  verdicts: Verdict[];
  human_decisions: { kind: string; text: string }[];
  final_hypothesis: string;
  status: SessionStatus;
  error: string;
}

export type DecisionAction = "approve" | "override_feedback" | "inject_hypothesis";

export interface SessionEvent {
  type: string;
  [key: string]: unknown;
}

"""Four-role session pipeline: Analyst -> Engineer -> Scientist -> Critic.

A session walks the role sequence, then iterates on Critic verdicts: revise
re-runs only the Scientist, reanalyze restarts from the Analyst, accept (or
the round cap) terminates. Optional human gates pause the machine before a
verdict is applied or before final acceptance; a paused session resumes with
approve, override_feedback, or inject_hypothesis.

Every session appends to an event log that replays into the exact transcript,
so the HTTP service can stream progress and survive restarts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import uuid
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

from .agents import AgentRunResult, LoopConfig, run_react_loop, run_toolcall_loop
from .errors import WorkbenchError
from .gateway import ChatMessage, GatewayError, LlmEndpoint, LlmGateway, LlmRequestParams
from .jsonio import append_jsonl, read_jsonl
from .toolbox import engineer_tool_schemas

logger = logging.getLogger(__name__)

ROLE_ANALYST = "analyst"
ROLE_ENGINEER = "engineer"
ROLE_SCIENTIST = "scientist"
ROLE_CRITIC = "critic"
ROLES = (ROLE_ANALYST, ROLE_ENGINEER, ROLE_SCIENTIST, ROLE_CRITIC)

DECISION_ACCEPT = "accept"
DECISION_REVISE = "revise"
DECISION_REANALYZE = "reanalyze"

STATUS_RUNNING = "running"
STATUS_AWAITING = "awaiting_human"
STATUS_ACCEPTED = "accepted"
STATUS_EXHAUSTED = "exhausted"
STATUS_FAILED = "failed"

TOOL_USE_NONE = "none"
TOOL_USE_REACT = "react"
TOOL_USE_TOOLCALL = "toolcall"

GATE_OFF = "off"
GATE_ON_CRITIC = "on_critic"
GATE_ON_FINAL = "on_final"

MAX_KEYWORDS = 10

_REACT_PROTOCOL = (
    "\nYou may search the literature. To search, reply with exactly one line:\n"
    'Action: search_pubmed({"terms": "<query>", "max_results": <n>})\n'
    "Each search result arrives as an Observation. When your digest is ready, reply:\n"
    "Final Answer: FINDINGS: <your structured digest>"
)
_TOOLCALL_PROTOCOL = (
    "\nUse the search_pubmed tool for literature evidence as needed, then reply "
    "with your final digest as:\nFINDINGS: <your structured digest>"
)


class ParseFailure(WorkbenchError):
    def __init__(self, message: str, raw_reply: str = ""):
        super().__init__(message)
        self.raw_reply = raw_reply


class NotAwaitingHuman(WorkbenchError):
    pass


class UnknownSession(WorkbenchError):
    pass


class SessionFailed(WorkbenchError):
    pass


@dataclass(frozen=True)
class RoleProfile:
    role: str
    system_prompt: str
    endpoint: LlmEndpoint
    params: LlmRequestParams = field(default_factory=LlmRequestParams)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class CriticVerdict:
    decision: str
    feedback: str = ""

    def __post_init__(self):
        if self.decision not in (DECISION_ACCEPT, DECISION_REVISE, DECISION_REANALYZE):
            raise ValueError(f"unknown decision {self.decision!r}")
        if self.decision != DECISION_ACCEPT and not self.feedback.strip():
            raise ValueError(f"{self.decision} verdicts require feedback")


@dataclass(frozen=True)
class SessionConfig:
    max_rounds: int = 3
    tool_use: str = TOOL_USE_NONE
    human_gate: str = GATE_OFF
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.tool_use not in (TOOL_USE_NONE, TOOL_USE_REACT, TOOL_USE_TOOLCALL):
            raise ValueError(f"unknown tool_use {self.tool_use!r}")
        if self.human_gate not in (GATE_OFF, GATE_ON_CRITIC, GATE_ON_FINAL):
            raise ValueError(f"unknown human_gate {self.human_gate!r}")

    def as_dict(self) -> dict[str, Any]:
        return {"max_rounds": self.max_rounds, "tool_use": self.tool_use,
                "human_gate": self.human_gate, "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class HumanDecision:
    kind: str  # approve | override_feedback | inject_hypothesis
    text: str = ""

    def __post_init__(self):
        if self.kind not in ("approve", "override_feedback", "inject_hypothesis"):
            raise ValueError(f"unknown decision kind {self.kind!r}")
        if self.kind != "approve" and not self.text.strip():
            raise ValueError(f"{self.kind} requires text")


@dataclass
class SessionTranscript:
    session_id: str
    background: str
    config: dict[str, Any] = field(default_factory=dict)
    turns: list[dict[str, Any]] = field(default_factory=list)
    agent_runs: list[dict[str, Any]] = field(default_factory=list)
    verdicts: list[dict[str, str]] = field(default_factory=list)
    human_decisions: list[dict[str, str]] = field(default_factory=list)
    final_hypothesis: str = ""
    status: str = STATUS_RUNNING
    error: str = ""

    def as_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "background": self.background,
            "config": self.config,
            "turns": self.turns,
            "agent_runs": self.agent_runs,
            "verdicts": self.verdicts,
            "human_decisions": self.human_decisions,
            "final_hypothesis": self.final_hypothesis,
            "status": self.status,
            "error": self.error,
        }

    def role_sequence(self) -> list[str]:
        return [t["role"] for t in self.turns]


# -- session event log --

class SessionStore:
    """Append-only per-session event logs, in memory or under a directory."""

    def __init__(self, root: str | Path | None = None):
        self._root = Path(root) if root is not None else None
        if self._root is not None:
            self._root.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, list[dict[str, Any]]] = {}
        self._lock = threading.Lock()

    def append(self, session_id: str, event: dict[str, Any]) -> None:
        with self._lock:
            if self._root is None:
                self._memory.setdefault(session_id, []).append(json.loads(json.dumps(event)))
            else:
                append_jsonl(self._root / f"{session_id}.jsonl", event)

    def events(self, session_id: str) -> list[dict[str, Any]]:
        with self._lock:
            if self._root is None:
                return list(self._memory.get(session_id, []))
            path = self._root / f"{session_id}.jsonl"
            if not path.is_file():
                return []
            return [obj for _, obj in read_jsonl(path)]

    def session_ids(self) -> list[str]:
        with self._lock:
            if self._root is None:
                return sorted(self._memory)
            return sorted(p.stem for p in self._root.glob("*.jsonl"))

    def event_log_path(self, session_id: str) -> Path | None:
        return None if self._root is None else self._root / f"{session_id}.jsonl"


def replay_transcript(events: Sequence[dict[str, Any]]) -> SessionTranscript:
    """Fold an event log back into the exact SessionTranscript."""
    if not events or events[0].get("type") != "started":
        raise UnknownSession("event log missing its start event")
    head = events[0]
    transcript = SessionTranscript(
        session_id=head["session_id"], background=head["background"], config=head.get("config", {})
    )
    for event in events[1:]:
        kind = event.get("type")
        if kind == "turn":
            transcript.turns.append(
                {"role": event["role"], "input_digest": event["input_digest"], "output": event["output"]}
            )
        elif kind == "agent_run":
            transcript.agent_runs.append(event["result"])
        elif kind == "verdict":
            transcript.verdicts.append({"decision": event["decision"], "feedback": event["feedback"]})
        elif kind == "human":
            transcript.human_decisions.append({"kind": event["kind"], "text": event.get("text", "")})
        elif kind == "awaiting":
            transcript.status = STATUS_AWAITING
        elif kind == "finished":
            transcript.status = event["status"]
            transcript.final_hypothesis = event.get("final_hypothesis", "")
            transcript.error = event.get("error", "")
    return transcript


# -- role operations --

def _digest(messages: Sequence[ChatMessage]) -> str:
    blob = json.dumps([m.to_wire() for m in messages], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _marker_tail(text: str, marker: str) -> str | None:
    idx = text.find(marker)
    if idx == -1:
        return None
    return text[idx + len(marker):].strip()


def _complete_with_reparse(gateway: LlmGateway, profile: RoleProfile,
                           user_content: str, parse: Callable[[str], Any],
                           reminder: str, retries: int = 2) -> tuple[Any, str, str]:
    """Completion with up to `retries` format-reminder retries.

    Returns (parsed value, raw reply, input digest of the first request).
    """
    messages = [
        ChatMessage(role="system", content=profile.system_prompt),
        ChatMessage(role="user", content=user_content),
    ]
    first_digest = _digest(messages)
    last_reply = ""
    for _ in range(retries + 1):
        reply = gateway.complete(profile.endpoint, messages, profile.params)
        last_reply = reply.text
        parsed = parse(reply.text)
        if parsed is not None:
            return parsed, reply.text, first_digest
        messages = messages + [
            ChatMessage(role="assistant", content=reply.text or "(empty)"),
            ChatMessage(role="user", content=reminder),
        ]
    raise ParseFailure(
        f"{profile.role}: unusable reply after {retries + 1} attempts: {last_reply[:120]!r}",
        raw_reply=last_reply,
    )


def parse_keywords(text: str) -> list[str] | None:
    tail = _marker_tail(text, "KEYWORDS:")
    if tail is None:
        return None
    first_line = tail.splitlines()[0] if tail else ""
    keywords = [k.strip() for k in first_line.split(";") if k.strip()]
    if not keywords:
        return None
    if len(keywords) > MAX_KEYWORDS:
        logger.warning("analyst returned %d keywords; truncating to %d", len(keywords), MAX_KEYWORDS)
        keywords = keywords[:MAX_KEYWORDS]
    return keywords


def run_analyst(background: str, profile: RoleProfile, gateway: LlmGateway,
                feedback: str | None = None) -> tuple[list[str], str]:
    """Extract 1-10 search keywords; returns (keywords, input digest)."""
    if not background.strip():
        raise ValueError("background must be nonempty")
    user = f"Research background:\n{background}"
    if feedback:
        user += f"\n\nCritic feedback from the previous round; steer your analysis accordingly:\n{feedback}"
    keywords, _, digest = _complete_with_reparse(
        gateway, profile, user, parse_keywords,
        "Reply with one line 'KEYWORDS: a; b; c' (1-10 semicolon-separated keywords).",
    )
    return keywords, digest


def run_engineer(keywords: Sequence[str], profile: RoleProfile, session: SessionConfig,
                 gateway: LlmGateway, tool_executor: Callable[[str, Any], str] | None = None,
                 ) -> tuple[str, str, AgentRunResult | None]:
    """Compile findings; with tool_use, drives the matching agent loop over search_pubmed.

    Returns (findings digest, input digest, agent run when a loop ran).
    """
    if not keywords:
        raise ValueError("keywords must be nonempty")
    keyword_line = "; ".join(keywords)
    user = f"Analyst keywords:\n{keyword_line}"

    if session.tool_use == TOOL_USE_NONE:
        findings, _, digest = _complete_with_reparse(
            gateway, profile, user,
            lambda text: (_marker_tail(text, "FINDINGS:") or text.strip()) or None,
            "Reply with 'FINDINGS: <digest>'.",
        )
        return findings, digest, None

    if tool_executor is None:
        raise ValueError(f"tool_use={session.tool_use} requires a tool executor")
    protocol = _REACT_PROTOCOL if session.tool_use == TOOL_USE_REACT else _TOOLCALL_PROTOCOL
    seed_messages = [
        ChatMessage(role="system", content=profile.system_prompt + protocol),
        ChatMessage(role="user", content=user),
    ]
    digest = _digest(seed_messages)
    config = LoopConfig(endpoint=profile.endpoint, tools=tuple(engineer_tool_schemas()),
                        params=profile.params)
    if session.tool_use == TOOL_USE_REACT:
        run = run_react_loop(seed_messages, config, tool_executor, gateway)
    else:
        run = run_toolcall_loop(seed_messages, config, tool_executor, gateway)
    if run.terminated_by == "error":
        raise SessionFailed("engineer agent loop failed on a provider error")
    findings = _marker_tail(run.final_text, "FINDINGS:") or run.final_text.strip() or "(no findings)"
    return findings, digest, run


def run_scientist(background: str, findings: str, profile: RoleProfile, gateway: LlmGateway,
                  prior: tuple[str, str] | None = None) -> tuple[str, str]:
    """Draft (or revise) the hypothesis; returns (hypothesis, input digest)."""
    if not background.strip():
        raise ValueError("background must be nonempty")
    user = f"Research background:\n{background}\n\nEngineer findings:\n{findings}"
    if prior is not None:
        previous_hypothesis, feedback = prior
        user += (
            f"\n\nYour previous draft:\n{previous_hypothesis}"
            f"\n\nCritic feedback to address:\n{feedback}"
        )
    hypothesis, _, digest = _complete_with_reparse(
        gateway, profile, user,
        lambda text: _marker_tail(text, "HYPOTHESIS:") or None,
        "Reply with 'HYPOTHESIS: <your hypothesis>'.",
    )
    return hypothesis, digest


_DECISION_RE = re.compile(r"(?im)^\s*decision\s*[:=]\s*(accept|revise|reanalyze)\b")
_FEEDBACK_RE = re.compile(r"(?is)^\s*feedback\s*[:=]\s*(?P<rest>.*)$", re.MULTILINE)


def parse_verdict(text: str) -> CriticVerdict | None:
    match = _DECISION_RE.search(text or "")
    if not match:
        return None
    decision = match.group(1).lower()
    feedback_match = _FEEDBACK_RE.search(text)
    feedback = feedback_match.group("rest").strip() if feedback_match else ""
    if decision != DECISION_ACCEPT and not feedback:
        feedback = text.strip()  # keep the invariant: non-accept verdicts carry feedback
    return CriticVerdict(decision=decision, feedback=feedback)


def run_critic(background: str, hypothesis: str, profile: RoleProfile,
               gateway: LlmGateway) -> tuple[CriticVerdict, str]:
    """Judge the draft; unparseable replies fail safe to revise with the raw text."""
    if not background.strip() or not hypothesis.strip():
        raise ValueError("background and hypothesis must be nonempty")
    user = f"Research background:\n{background}\n\nDraft hypothesis:\n{hypothesis}"
    try:
        verdict, _, digest = _complete_with_reparse(
            gateway, profile, user, parse_verdict,
            "Reply with 'DECISION: accept|revise|reanalyze' and 'FEEDBACK: <text>'.",
        )
        return verdict, digest
    except ParseFailure as exc:
        raw = exc.raw_reply.strip() or "(critic reply was empty)"
        messages = [ChatMessage(role="system", content=profile.system_prompt),
                    ChatMessage(role="user", content=user)]
        return CriticVerdict(decision=DECISION_REVISE, feedback=raw), _digest(messages)


def default_role_profiles(endpoint: LlmEndpoint,
                          params: LlmRequestParams | None = None,
                          template_dir: str | Path | None = None) -> dict[str, RoleProfile]:
    """All four roles on one endpoint, with system prompts from the template files."""
    params = params or LlmRequestParams()
    profiles = {}
    for role in ROLES:
        name = f"{role}_system"
        if template_dir is not None and (Path(template_dir) / f"{name}.txt").is_file():
            prompt = (Path(template_dir) / f"{name}.txt").read_text(encoding="utf-8").strip()
        else:
            prompt = resources.files("hypobench.templates").joinpath(f"{name}.txt").read_text(
                encoding="utf-8").strip()
        profiles[role] = RoleProfile(role=role, system_prompt=prompt, endpoint=endpoint, params=params)
    return profiles


# -- the session engine --

class _SessionEngine:
    def __init__(self, session_id: str, background: str, roles: dict[str, RoleProfile],
                 config: SessionConfig, gateway: LlmGateway, store: SessionStore,
                 tool_executor: Callable[[str, Any], str] | None):
        self.session_id = session_id
        self.background = background
        self.roles = roles
        self.config = config
        self.gateway = gateway
        self.store = store
        self.tool_executor = tool_executor
        self.lock = threading.Lock()

        self.events: list[dict[str, Any]] = []
        self.status = STATUS_RUNNING
        self.keywords: list[str] = []
        self.findings = ""
        self.hypothesis = ""
        self.verdict_count = 0
        self.pending: dict[str, Any] | None = None  # {"kind": "verdict"|"final", ...}

    # event helpers

    def _emit(self, event: dict[str, Any]) -> None:
        self.events.append(event)
        self.store.append(self.session_id, event)

    def _turn(self, role: str, input_digest: str, output: str) -> None:
        self._emit({"type": "turn", "role": role, "input_digest": input_digest, "output": output})

    def transcript(self) -> SessionTranscript:
        return replay_transcript(self.events)

    # lifecycle

    def start(self) -> SessionTranscript:
        self._emit({
            "type": "started",
            "session_id": self.session_id,
            "background": self.background,
            "config": self.config.as_dict(),
        })
        return self._drive(self._phase_analyze)

    def resume(self, decision: HumanDecision) -> SessionTranscript:
        with self.lock:
            if self.status != STATUS_AWAITING or self.pending is None:
                raise NotAwaitingHuman(f"session {self.session_id} is {self.status}")
            pending, self.pending = self.pending, None
            self.status = STATUS_RUNNING
            self._emit({"type": "human", "kind": decision.kind, "text": decision.text})

            if decision.kind == "approve":
                if pending["kind"] == "verdict":
                    verdict = CriticVerdict(pending["decision"], pending.get("feedback", ""))
                    return self._drive(lambda: self._apply_verdict(verdict))
                return self._drive(lambda: self._finish(STATUS_ACCEPTED))
            if decision.kind == "override_feedback":
                verdict = CriticVerdict(DECISION_REVISE, decision.text)
                return self._drive(lambda: self._apply_verdict(verdict))
            # inject_hypothesis: the human takes the Scientist turn (keeps the
            # role grammar intact), then the Critic reviews the injected draft.
            self.hypothesis = decision.text
            self._turn(ROLE_SCIENTIST, "human:inject", decision.text)
            return self._drive(self._phase_critic)

    def _drive(self, first_phase: Callable[[], Callable | None]) -> SessionTranscript:
        phase: Callable[[], Callable | None] | None = first_phase
        try:
            while phase is not None:
                phase = phase()
        except (WorkbenchError, GatewayError) as exc:
            return self._fail(str(exc))
        return self.transcript()

    # phases: each returns the next phase callable, or None when paused/terminal

    def _phase_analyze(self, feedback: str | None = None) -> Callable | None:
        keywords, digest = run_analyst(self.background, self.roles[ROLE_ANALYST],
                                       self.gateway, feedback)
        self.keywords = keywords
        self._turn(ROLE_ANALYST, digest, "; ".join(keywords))
        return self._phase_engineer

    def _phase_engineer(self) -> Callable | None:
        findings, digest, run = run_engineer(self.keywords, self.roles[ROLE_ENGINEER],
                                             self.config, self.gateway, self.tool_executor)
        self.findings = findings
        self._turn(ROLE_ENGINEER, digest, findings)
        if run is not None:
            self._emit({"type": "agent_run", "result": run.as_dict()})
        return lambda: self._phase_scientist(None)

    def _phase_scientist(self, prior: tuple[str, str] | None) -> Callable | None:
        hypothesis, digest = run_scientist(self.background, self.findings,
                                           self.roles[ROLE_SCIENTIST], self.gateway, prior)
        self.hypothesis = hypothesis
        self._turn(ROLE_SCIENTIST, digest, hypothesis)
        return self._phase_critic

    def _phase_critic(self) -> Callable | None:
        if self.verdict_count >= self.config.max_rounds:
            return lambda: self._finish(STATUS_EXHAUSTED)
        verdict, digest = run_critic(self.background, self.hypothesis,
                                     self.roles[ROLE_CRITIC], self.gateway)
        self.verdict_count += 1
        self._turn(ROLE_CRITIC, digest, f"{verdict.decision}: {verdict.feedback}".rstrip(": "))
        self._emit({"type": "verdict", "decision": verdict.decision, "feedback": verdict.feedback})
        if self.config.human_gate == GATE_ON_CRITIC:
            return lambda: self._pause({"kind": "verdict", "decision": verdict.decision,
                                        "feedback": verdict.feedback})
        return lambda: self._apply_verdict(verdict)

    def _apply_verdict(self, verdict: CriticVerdict) -> Callable | None:
        if verdict.decision == DECISION_ACCEPT:
            if self.config.human_gate == GATE_ON_FINAL:
                return lambda: self._pause({"kind": "final"})
            return lambda: self._finish(STATUS_ACCEPTED)
        if self.verdict_count >= self.config.max_rounds:
            return lambda: self._finish(STATUS_EXHAUSTED)
        if verdict.decision == DECISION_REVISE:
            prior = (self.hypothesis, verdict.feedback)
            return lambda: self._phase_scientist(prior)
        return lambda: self._phase_analyze(verdict.feedback)

    def _pause(self, pending: dict[str, Any]) -> None:
        self.pending = pending
        self.status = STATUS_AWAITING
        self._emit({"type": "awaiting", "pending": pending, "state": self._state_snapshot()})
        return None

    def _finish(self, status: str) -> None:
        self.status = status
        self._emit({"type": "finished", "status": status, "final_hypothesis": self.hypothesis})
        return None

    def _fail(self, error: str) -> SessionTranscript:
        self.status = STATUS_FAILED
        self._emit({"type": "finished", "status": STATUS_FAILED,
                    "final_hypothesis": self.hypothesis, "error": error})
        return self.transcript()

    def _state_snapshot(self) -> dict[str, Any]:
        return {
            "keywords": self.keywords,
            "findings": self.findings,
            "hypothesis": self.hypothesis,
            "verdict_count": self.verdict_count,
        }


class Orchestrator:
    """Session runner and registry; one gateway shared across sessions."""

    def __init__(self, gateway: LlmGateway | None = None, store: SessionStore | None = None,
                 tool_executor: Callable[[str, Any], str] | None = None):
        self.gateway = gateway or LlmGateway()
        self.store = store or SessionStore()
        self.tool_executor = tool_executor
        self._engines: dict[str, _SessionEngine] = {}
        self._registry_lock = threading.Lock()

    def run_session(self, background: str, roles: dict[str, RoleProfile], config: SessionConfig,
                    session_id: str | None = None) -> SessionTranscript:
        if not background.strip():
            raise ValueError("background must be nonempty")
        missing = [r for r in ROLES if r not in roles]
        if missing:
            raise ValueError(f"missing role profiles: {', '.join(missing)}")
        session_id = session_id or f"session-{uuid.uuid4().hex[:12]}"
        engine = _SessionEngine(session_id, background, roles, config, self.gateway,
                                self.store, self.tool_executor)
        with self._registry_lock:
            if session_id in self._engines:
                raise ValueError(f"session id {session_id!r} already exists")
            self._engines[session_id] = engine
        return engine.start()

    def resume_with_decision(self, session_id: str, decision: HumanDecision) -> SessionTranscript:
        engine = self._engines.get(session_id)
        if engine is None:
            if self.store.events(session_id):
                raise NotAwaitingHuman(f"session {session_id} is not resumable in this process")
            raise UnknownSession(session_id)
        return engine.resume(decision)

    def rehydrate(self, session_id: str, roles: dict[str, RoleProfile]) -> SessionTranscript:
        """Rebuild a paused session's engine from its event log after a restart."""
        events = self.store.events(session_id)
        if not events:
            raise UnknownSession(session_id)
        transcript = replay_transcript(events)
        if transcript.status != STATUS_AWAITING:
            return transcript
        awaiting = [e for e in events if e.get("type") == "awaiting"][-1]
        engine = _SessionEngine(session_id, transcript.background, roles,
                                SessionConfig(**transcript.config), self.gateway,
                                self.store, self.tool_executor)
        engine.events = list(events)
        engine.status = STATUS_AWAITING
        engine.pending = awaiting["pending"]
        state = awaiting.get("state", {})
        engine.keywords = list(state.get("keywords", []))
        engine.findings = state.get("findings", "")
        engine.hypothesis = state.get("hypothesis", "")
        engine.verdict_count = int(state.get("verdict_count", 0))
        with self._registry_lock:
            self._engines[session_id] = engine
        return transcript

    def transcript(self, session_id: str) -> SessionTranscript:
        engine = self._engines.get(session_id)
        if engine is not None:
            return engine.transcript()
        events = self.store.events(session_id)
        if not events:
            raise UnknownSession(session_id)
        return replay_transcript(events)

    def session_ids(self) -> list[str]:
        with self._registry_lock:
            known = set(self._engines)
        return sorted(known | set(self.store.session_ids()))


ROLE_PATTERN = re.compile(r"^(AESC)((SC)|(AESC))*$")


def matches_role_grammar(roles: Sequence[str]) -> bool:
    """Check a turn sequence against (A E S C)((S C)|(A E S C))*."""
    letters = "".join({"analyst": "A", "engineer": "E", "scientist": "S", "critic": "C"}.get(r, "?")
                      for r in roles)
    return bool(ROLE_PATTERN.match(letters))

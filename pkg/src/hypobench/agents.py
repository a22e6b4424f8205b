"""Tool-use loop engines.

Two protocols over the same gateway: a ReAct loop that reads
Thought / Action / Final Answer directives out of plain text, and a loop over
the provider-native tool-call mechanism. Both bound the number of model calls
by max_steps, record a full ordered transcript, and degrade gracefully on
malformed model output (a bad action becomes a thought; a failing tool
becomes an error observation) because models demonstrably fumble the
thought-action-observation protocol.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from .errors import WorkbenchError
from .gateway import (
    ChatMessage,
    GatewayError,
    LlmEndpoint,
    LlmGateway,
    LlmRequestParams,
    ToolSchema,
)
from .jsonio import append_jsonl

STEP_THOUGHT = "thought"
STEP_ACTION = "action"
STEP_OBSERVATION = "observation"
STEP_FINAL = "final"

TERMINATED_FINAL = "final_marker"
TERMINATED_CAP = "step_cap"
TERMINATED_ERROR = "error"

STEP_CAP_MARKER = "[truncated by step cap]"
ERROR_SENTINEL = "ERROR:"

DEFAULT_FINAL_MARKER = "Final Answer:"


class ToolExecutorError(WorkbenchError):
    """Raised by tool executors; recorded as an observation, never fatal."""


class UnknownTool(WorkbenchError):
    pass


ToolExecutor = Callable[[str, Any], str]


@dataclass(frozen=True)
class LoopConfig:
    endpoint: LlmEndpoint
    max_steps: int = 6
    tools: tuple[ToolSchema, ...] = ()
    stop_on: str = DEFAULT_FINAL_MARKER
    params: LlmRequestParams = field(default_factory=LlmRequestParams)

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class AgentStep:
    kind: str  # thought | action | observation | final
    content: str
    tool_name: str | None = None
    tool_args: Any = None

    def __post_init__(self):
        if self.kind == STEP_ACTION and not self.tool_name:
            raise ValueError("action steps require tool_name")

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "content": self.content,
            "tool_name": self.tool_name,
            "tool_args": self.tool_args,
        }


@dataclass
class AgentRunResult:
    steps: list[AgentStep]
    final_text: str
    terminated_by: str  # final_marker | step_cap | error
    model_calls: int = 0

    def as_dict(self) -> dict[str, Any]:
        return {
            "steps": [s.as_dict() for s in self.steps],
            "final_text": self.final_text,
            "terminated_by": self.terminated_by,
            "model_calls": self.model_calls,
        }


_ACTION_RE = re.compile(r"^\s*Action:\s*(?P<name>[A-Za-z0-9_.-]+)\s*\((?P<args>.*)\)\s*$")
_THOUGHT_RE = re.compile(r"^\s*Thought:\s*(?P<rest>.*)$")


def parse_react_reply(text: str, final_marker: str = DEFAULT_FINAL_MARKER) -> AgentStep:
    """Classify one model reply; the first matching directive line wins.

    Total by design: anything unrecognized (including malformed actions)
    becomes a thought step carrying the raw text.
    """
    lines = text.splitlines()
    for idx, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith(final_marker):
            remainder = stripped[len(final_marker):].strip()
            tail = "\n".join(lines[idx + 1:]).strip()
            content = (remainder + ("\n" + tail if tail else "")).strip()
            return AgentStep(kind=STEP_FINAL, content=content)
        action = _ACTION_RE.match(line)
        if action:
            return AgentStep(
                kind=STEP_ACTION,
                content=stripped,
                tool_name=action.group("name"),
                tool_args=_parse_action_args(action.group("args")),
            )
        thought = _THOUGHT_RE.match(line)
        if thought:
            rest = "\n".join([thought.group("rest")] + lines[idx + 1:]).strip()
            return AgentStep(kind=STEP_THOUGHT, content=rest or stripped)
    return AgentStep(kind=STEP_THOUGHT, content=text.strip() or "(empty reply)")


def _parse_action_args(raw: str) -> Any:
    raw = raw.strip()
    if not raw:
        return {}
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # tool executors receive the raw argument text


def run_react_loop(seed_messages: Sequence[ChatMessage], config: LoopConfig,
                   tool_executor: ToolExecutor, gateway: LlmGateway | None = None) -> AgentRunResult:
    """Model reply -> parse -> (action? execute, observe) -> repeat, bounded by max_steps."""
    if not seed_messages:
        raise ValueError("seed_messages must be nonempty")
    gateway = gateway or LlmGateway()
    messages = list(seed_messages)
    steps: list[AgentStep] = []
    last_text = ""

    for call_index in range(config.max_steps):
        try:
            response = gateway.complete(config.endpoint, messages, config.params)
        except GatewayError:
            return AgentRunResult(steps=steps, final_text=last_text,
                                  terminated_by=TERMINATED_ERROR, model_calls=call_index)
        last_text = response.text
        messages.append(ChatMessage(role="assistant", content=response.text or "(empty)"))
        step = parse_react_reply(response.text, config.stop_on)
        steps.append(step)

        if step.kind == STEP_FINAL:
            return AgentRunResult(steps=steps, final_text=step.content,
                                  terminated_by=TERMINATED_FINAL, model_calls=call_index + 1)
        if step.kind == STEP_ACTION:
            observation = _execute(tool_executor, step.tool_name, step.tool_args)
            steps.append(AgentStep(kind=STEP_OBSERVATION, content=observation))
            messages.append(ChatMessage(role="user", content=f"Observation: {observation}"))

    final_text = (last_text + " " + STEP_CAP_MARKER).strip() if last_text else STEP_CAP_MARKER
    return AgentRunResult(steps=steps, final_text=final_text,
                          terminated_by=TERMINATED_CAP, model_calls=config.max_steps)


def run_toolcall_loop(seed_messages: Sequence[ChatMessage], config: LoopConfig,
                      tool_executor: ToolExecutor, gateway: LlmGateway | None = None) -> AgentRunResult:
    """Native tool-call protocol: execute every returned call, answer with tool messages."""
    if not seed_messages:
        raise ValueError("seed_messages must be nonempty")
    if not config.tools:
        raise ValueError("toolcall loop requires declared tools")
    gateway = gateway or LlmGateway()
    params = LlmRequestParams(
        temperature=config.params.temperature,
        max_tokens=config.params.max_tokens,
        tools=tuple(config.tools),
        seed=config.params.seed,
    )
    declared = {t.name for t in config.tools}
    messages = list(seed_messages)
    steps: list[AgentStep] = []
    last_text = ""

    for call_index in range(config.max_steps):
        try:
            response = gateway.complete(config.endpoint, messages, params)
        except GatewayError:
            return AgentRunResult(steps=steps, final_text=last_text,
                                  terminated_by=TERMINATED_ERROR, model_calls=call_index)
        last_text = response.text or last_text

        if not response.tool_calls:
            steps.append(AgentStep(kind=STEP_FINAL, content=response.text))
            return AgentRunResult(steps=steps, final_text=response.text,
                                  terminated_by=TERMINATED_FINAL, model_calls=call_index + 1)

        messages.append(ChatMessage(role="assistant", content=response.text,
                                    tool_calls=response.tool_calls))
        for tc in response.tool_calls:
            args = _parse_action_args(tc.arguments)
            steps.append(AgentStep(kind=STEP_ACTION, content=f"{tc.name}({tc.arguments})",
                                   tool_name=tc.name, tool_args=args))
            if tc.name not in declared:
                observation = f"{ERROR_SENTINEL} unknown tool {tc.name!r}"
            else:
                observation = _execute(tool_executor, tc.name, args)
            steps.append(AgentStep(kind=STEP_OBSERVATION, content=observation))
            messages.append(ChatMessage(role="tool", content=observation, tool_call_id=tc.call_id))

    final_text = (last_text + " " + STEP_CAP_MARKER).strip() if last_text else STEP_CAP_MARKER
    return AgentRunResult(steps=steps, final_text=final_text,
                          terminated_by=TERMINATED_CAP, model_calls=config.max_steps)


def _execute(tool_executor: ToolExecutor, name: str, args: Any) -> str:
    try:
        return str(tool_executor(name, args))
    except (WorkbenchError, KeyError, ValueError, TypeError) as exc:
        return f"{ERROR_SENTINEL} {exc}"


def dump_run(result: AgentRunResult, path: str | Path, run_id: str,
             timestamp: Callable[[], float] | None = None) -> None:
    """Append the run's steps as JSONL records tagged with run id and timestamps."""
    import time as _time

    now = timestamp or _time.time
    for index, step in enumerate(result.steps):
        record = {"run_id": run_id, "index": index, "timestamp": now(), **step.as_dict()}
        append_jsonl(path, record)
    append_jsonl(path, {
        "run_id": run_id,
        "index": len(result.steps),
        "timestamp": now(),
        "kind": "run_end",
        "final_text": result.final_text,
        "terminated_by": result.terminated_by,
        "model_calls": result.model_calls,
    })

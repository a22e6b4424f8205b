"""Provider-agnostic chat-completion client.

One wire dialect: HTTP POST {base_url}/chat/completions with the standard
chat-completions body. Retries with exponential backoff on transient
failures, per-endpoint parallelism caps and sliding-window request pacing,
optional JSONL tracing, and a scriptable in-process mock endpoint for tests.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx

from .errors import WorkbenchError

logger = logging.getLogger(__name__)

RETRYABLE_STATUSES = frozenset({429}) | frozenset(range(500, 600))


class GatewayError(WorkbenchError):
    """Base for gateway failures."""


class AuthMissing(GatewayError):
    """The endpoint names an API-key environment variable that is not set."""


class ProviderError(GatewayError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned {status}: {body[:200]}")
        self.status = status
        self.body = body


class Timeout(GatewayError):
    """Network failure or timeout persisted through all retry attempts."""


class ScriptExhausted(GatewayError):
    """A mock endpoint received more calls than its script provides."""


@dataclass(frozen=True)
class ToolCall:
    call_id: str
    name: str
    arguments: str  # JSON-encoded argument object as sent on the wire


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant | tool
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    tool_call_id: str | None = None

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant", "tool"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "tool" and not self.tool_call_id:
            raise ValueError("tool messages require tool_call_id")
        if not self.content and not self.tool_calls:
            raise ValueError("message needs content or tool calls")

    def to_wire(self) -> dict[str, Any]:
        wire: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            wire["tool_calls"] = [
                {
                    "id": tc.call_id,
                    "type": "function",
                    "function": {"name": tc.name, "arguments": tc.arguments},
                }
                for tc in self.tool_calls
            ]
        if self.tool_call_id is not None:
            wire["tool_call_id"] = self.tool_call_id
        return wire


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: dict[str, Any] = field(default_factory=dict)

    def to_wire(self) -> dict[str, Any]:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            },
        }


@dataclass
class LlmEndpoint:
    name: str
    base_url: str
    model_id: str
    api_key_env: str = ""
    max_parallel: int = 4
    requests_per_minute: int = 600

    def __post_init__(self):
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")


@dataclass(frozen=True)
class LlmRequestParams:
    temperature: float = 1.0
    max_tokens: int = 1024
    tools: tuple[ToolSchema, ...] = ()
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    tool_calls: tuple[ToolCall, ...] = ()
    finish_reason: str = "stop"  # stop | length | tool_call | error

    def __post_init__(self):
        if self.finish_reason == "tool_call" and not self.tool_calls:
            raise ValueError("finish_reason=tool_call requires tool_calls")


@dataclass(frozen=True)
class MockFailure:
    """Scriptable failure: an HTTP status or a simulated network drop."""

    status: int | None = 500
    body: str = "scripted failure"
    network: bool = False


ScriptEntry = Any  # LlmResponse | MockFailure | callable(messages, params) -> either


class MockEndpoint(LlmEndpoint):
    """Endpoint whose completions replay a canned script, in order.

    Records every call for assertions (captured messages and params, peak
    in-flight concurrency). Consuming past the end raises ScriptExhausted.
    """

    def __init__(self, script: Sequence[ScriptEntry], *, name: str = "mock",
                 model_id: str = "mock-model", max_parallel: int = 8,
                 requests_per_minute: int = 1_000_000):
        super().__init__(name=name, base_url="mock://", model_id=model_id,
                         api_key_env="", max_parallel=max_parallel,
                         requests_per_minute=requests_per_minute)
        if not script:
            raise ValueError("mock script must be nonempty")
        self._script: deque[ScriptEntry] = deque(script)
        self._lock = threading.Lock()
        self.calls: list[tuple[tuple[ChatMessage, ...], LlmRequestParams]] = []
        self._active = 0
        self.peak_parallel = 0

    def serve(self, messages: Sequence[ChatMessage], params: LlmRequestParams) -> LlmResponse:
        with self._lock:
            self.calls.append((tuple(messages), params))
            if not self._script:
                raise ScriptExhausted(f"mock {self.name!r} script exhausted after {len(self.calls) - 1} replies")
            entry = self._script.popleft()
            self._active += 1
            self.peak_parallel = max(self.peak_parallel, self._active)
        try:
            if callable(entry) and not isinstance(entry, (LlmResponse, MockFailure)):
                entry = entry(tuple(messages), params)
            if isinstance(entry, MockFailure):
                if entry.network:
                    raise httpx.ConnectError(entry.body)
                raise ProviderError(entry.status or 500, entry.body)
            if isinstance(entry, Exception):
                raise entry
            return entry
        finally:
            with self._lock:
                self._active -= 1


def make_mock_endpoint(script: Sequence[ScriptEntry], **kwargs: Any) -> MockEndpoint:
    """Build an endpoint that replays `script` entries, one per completion call."""
    return MockEndpoint(script, **kwargs)


class _EndpointState:
    def __init__(self, endpoint: LlmEndpoint):
        self.slots = threading.BoundedSemaphore(endpoint.max_parallel)
        self.lock = threading.Lock()
        self.request_times: deque[float] = deque()


_FINISH_REASONS = {"stop": "stop", "length": "length", "tool_calls": "tool_call", "tool_call": "tool_call"}
_RATE_WINDOW = 60.0


class LlmGateway:
    """Shared client for all endpoints; safe to call from any thread.

    clock/sleep/rng are injectable so pacing and backoff are testable with a
    simulated clock. Backoff: attempts at 1s, 2s, 4s with +/-20% jitter,
    retrying only network errors, 429, and 5xx.
    """

    def __init__(self, *, max_attempts: int = 3, backoff_base: float = 1.0,
                 timeout: float = 60.0, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep,
                 jitter: Callable[[], float] | None = None,
                 trace_path: str | Path | None = None,
                 http_transport: httpx.BaseTransport | None = None):
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._clock = clock
        self._sleep = sleep
        self._jitter = jitter or (lambda: __import__("random").uniform(0.8, 1.2))
        self._trace_path = Path(trace_path) if trace_path else None
        self._trace_lock = threading.Lock()
        self._states: dict[str, _EndpointState] = {}
        self._states_lock = threading.Lock()
        self._client = httpx.Client(timeout=timeout, transport=http_transport)

    def complete(self, endpoint: LlmEndpoint, messages: Sequence[ChatMessage],
                 params: LlmRequestParams | None = None) -> LlmResponse:
        """Run one chat completion, honoring retries, pacing, and parallel caps."""
        if not messages:
            raise ValueError("messages must be nonempty")
        params = params or LlmRequestParams()
        frozen = tuple(messages)  # never mutate or reuse the caller's list
        api_key = self._resolve_key(endpoint)

        state = self._state_for(endpoint)
        with state.slots:
            last_error: Exception | None = None
            for attempt in range(1, self.max_attempts + 1):
                self._pace(endpoint, state)
                try:
                    response = self._dispatch(endpoint, frozen, params, api_key)
                    self._trace(endpoint, frozen, params, response, attempt)
                    return response
                except (ProviderError, httpx.TimeoutException, httpx.TransportError) as exc:
                    if isinstance(exc, ProviderError) and exc.status not in RETRYABLE_STATUSES:
                        raise
                    last_error = exc
                    logger.warning("endpoint %s attempt %d/%d failed: %s",
                                   endpoint.name, attempt, self.max_attempts, exc)
                    if attempt < self.max_attempts:
                        self._sleep(self.backoff_base * (2 ** (attempt - 1)) * self._jitter())
            if isinstance(last_error, ProviderError):
                raise last_error
            raise Timeout(f"endpoint {endpoint.name}: {last_error}")

    def close(self) -> None:
        self._client.close()

    # -- internals --

    def _resolve_key(self, endpoint: LlmEndpoint) -> str:
        if isinstance(endpoint, MockEndpoint) or not endpoint.api_key_env:
            return ""
        key = os.environ.get(endpoint.api_key_env, "")
        if not key:
            raise AuthMissing(f"environment variable {endpoint.api_key_env} is not set")
        return key

    def _state_for(self, endpoint: LlmEndpoint) -> _EndpointState:
        with self._states_lock:
            state = self._states.get(endpoint.name)
            if state is None:
                state = _EndpointState(endpoint)
                self._states[endpoint.name] = state
            return state

    def _pace(self, endpoint: LlmEndpoint, state: _EndpointState) -> None:
        while True:
            with state.lock:
                now = self._clock()
                times = state.request_times
                while times and now - times[0] >= _RATE_WINDOW:
                    times.popleft()
                if len(times) < endpoint.requests_per_minute:
                    times.append(now)
                    return
                wait = times[0] + _RATE_WINDOW - now
            self._sleep(max(wait, 0.001))

    def _dispatch(self, endpoint: LlmEndpoint, messages: tuple[ChatMessage, ...],
                  params: LlmRequestParams, api_key: str) -> LlmResponse:
        if isinstance(endpoint, MockEndpoint):
            return endpoint.serve(messages, params)

        payload: dict[str, Any] = {
            "model": endpoint.model_id,
            "messages": [m.to_wire() for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.tools:
            payload["tools"] = [t.to_wire() for t in params.tools]
            payload["tool_choice"] = "auto"
        if params.seed is not None:
            payload["seed"] = params.seed
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        response = self._client.post(url, json=payload, headers=headers)
        if response.status_code != 200:
            raise ProviderError(response.status_code, response.text)
        return parse_wire_response(response.json())

    def _trace(self, endpoint: LlmEndpoint, messages: tuple[ChatMessage, ...],
               params: LlmRequestParams, response: LlmResponse, attempt: int) -> None:
        if self._trace_path is None:
            return
        record = {
            "endpoint": endpoint.name,
            "model": endpoint.model_id,
            "attempt": attempt,
            "request": [m.to_wire() for m in messages],
            "temperature": params.temperature,
            "response": {
                "text": response.text,
                "finish_reason": response.finish_reason,
                "tool_calls": [
                    {"id": tc.call_id, "name": tc.name, "arguments": tc.arguments}
                    for tc in response.tool_calls
                ],
            },
        }
        with self._trace_lock:
            with self._trace_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def parse_wire_response(data: dict[str, Any]) -> LlmResponse:
    """Decode one chat-completions response body into an LlmResponse."""
    try:
        choice = data["choices"][0]
        message = choice.get("message", {})
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(200, f"malformed completion body: {exc}") from exc
    tool_calls = tuple(
        ToolCall(
            call_id=tc.get("id", f"call_{i}"),
            name=tc.get("function", {}).get("name", ""),
            arguments=tc.get("function", {}).get("arguments", ""),
        )
        for i, tc in enumerate(message.get("tool_calls") or [])
    )
    raw_reason = choice.get("finish_reason") or ("tool_calls" if tool_calls else "stop")
    finish = _FINISH_REASONS.get(raw_reason, "stop")
    if tool_calls and finish != "tool_call":
        finish = "tool_call"
    return LlmResponse(text=message.get("content") or "", tool_calls=tool_calls, finish_reason=finish)


def with_temperature(params: LlmRequestParams, temperature: float) -> LlmRequestParams:
    return replace(params, temperature=temperature)

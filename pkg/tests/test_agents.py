"""Agent loop tests: directive parsing, loop contracts, fuzz robustness."""

from __future__ import annotations

import json
import random

import pytest

from hypobench.agents import (
    STEP_CAP_MARKER,
    AgentStep,
    LoopConfig,
    parse_react_reply,
    run_react_loop,
    run_toolcall_loop,
)
from hypobench.gateway import (
    ChatMessage,
    LlmGateway,
    LlmResponse,
    MockFailure,
    ToolCall,
    ToolSchema,
    make_mock_endpoint,
)

SEARCH_TOOL = ToolSchema(
    name="search_pubmed",
    description="search",
    parameters={"type": "object", "properties": {"terms": {"type": "string"}}},
)


def gw() -> LlmGateway:
    return LlmGateway(sleep=lambda _: None)


def seed() -> list[ChatMessage]:
    return [ChatMessage(role="system", content="agent"), ChatMessage(role="user", content="go")]


def fixture_tool(name: str, args) -> str:
    if name != "search_pubmed":
        raise KeyError(name)
    return f"found 2 results for {args}"


class TestParseReactReply:
    def test_final_answer(self):
        step = parse_react_reply("Final Answer: X")
        assert step.kind == "final" and step.content == "X"

    def test_multiline_final_answer(self):
        step = parse_react_reply("Final Answer: first line\nsecond line")
        assert step.kind == "final"
        assert step.content == "first line\nsecond line"

    def test_action_with_json_args(self):
        step = parse_react_reply('Action: search_pubmed({"terms":"amyloid"})')
        assert step.kind == "action"
        assert step.tool_name == "search_pubmed"
        assert step.tool_args == {"terms": "amyloid"}

    def test_thought(self):
        step = parse_react_reply("Thought: consider the background first")
        assert step.kind == "thought"
        assert step.content == "consider the background first"

    def test_first_matching_directive_wins(self):
        step = parse_react_reply("Thought: hmm\nAction: search_pubmed({})")
        assert step.kind == "thought"
        step = parse_react_reply("Action: search_pubmed({})\nFinal Answer: X")
        assert step.kind == "action"

    def test_malformed_action_degrades_to_thought(self):
        step = parse_react_reply("Action: search_pubmed(")
        assert step.kind == "thought"
        assert "search_pubmed" in step.content

    def test_unrecognized_becomes_thought(self):
        step = parse_react_reply("just some prose")
        assert step.kind == "thought" and step.content == "just some prose"

    def test_non_json_args_passed_raw(self):
        step = parse_react_reply("Action: search_pubmed(amyloid beta)")
        assert step.kind == "action" and step.tool_args == "amyloid beta"

    def test_fuzz_corpus_never_crashes(self):
        rng = random.Random(17)
        fragments = [
            "Action: ", "Thought:", "Final Answer", "search_pubmed(", "))((", "{\"terms\":",
            "Action: x y z(}", "Observation: fake", "\n\n\n", "Action:()", "Final Answer:",
            "Action: t(1,2,", ":::", "Thought", "aAction: t({})",
        ]
        for _ in range(50):
            blob = "".join(rng.choice(fragments) for _ in range(rng.randint(1, 6)))
            step = parse_react_reply(blob)
            assert step.kind in ("thought", "action", "final")


class TestReactLoop:
    def test_immediate_final(self):
        endpoint = make_mock_endpoint([LlmResponse(text="Final Answer: h")])
        result = run_react_loop(seed(), LoopConfig(endpoint=endpoint), fixture_tool, gw())
        assert result.terminated_by == "final_marker"
        assert result.final_text == "h"
        assert [s.kind for s in result.steps] == ["final"]
        assert result.model_calls == 1

    def test_action_observation_final(self):
        endpoint = make_mock_endpoint([
            LlmResponse(text='Action: search_pubmed({"terms": "amyloid"})'),
            LlmResponse(text="Final Answer: plaques drive decline"),
        ])
        result = run_react_loop(seed(), LoopConfig(endpoint=endpoint), fixture_tool, gw())
        assert [s.kind for s in result.steps] == ["action", "observation", "final"]
        assert "found 2 results" in result.steps[1].content
        # The observation is echoed back to the model verbatim.
        last_user = [m for m in endpoint.calls[1][0] if m.role == "user"][-1]
        assert last_user.content == f"Observation: {result.steps[1].content}"

    def test_step_cap_terminates_after_exact_model_calls(self):
        endpoint = make_mock_endpoint([LlmResponse(text='Action: search_pubmed({"terms": "x"})')] * 5)
        config = LoopConfig(endpoint=endpoint, max_steps=3)
        result = run_react_loop(seed(), config, fixture_tool, gw())
        assert result.terminated_by == "step_cap"
        assert result.model_calls == 3
        assert len(endpoint.calls) == 3
        assert STEP_CAP_MARKER in result.final_text

    def test_tool_error_recorded_and_loop_continues(self):
        endpoint = make_mock_endpoint([
            LlmResponse(text='Action: search_pubmed({"terms": "x"})'),
            LlmResponse(text="Final Answer: done"),
        ])

        def broken_tool(name, args):
            raise KeyError("boom")

        result = run_react_loop(seed(), LoopConfig(endpoint=endpoint), broken_tool, gw())
        assert result.terminated_by == "final_marker"
        assert result.steps[1].kind == "observation"
        assert result.steps[1].content.startswith("ERROR:")

    def test_provider_error_terminates_with_error(self):
        endpoint = make_mock_endpoint([
            LlmResponse(text="Thought: hmm"),
            MockFailure(status=400),
        ])
        result = run_react_loop(seed(), LoopConfig(endpoint=endpoint), fixture_tool, gw())
        assert result.terminated_by == "error"
        assert [s.kind for s in result.steps] == ["thought"]

    def test_deterministic_replay(self):
        script = [
            LlmResponse(text='Action: search_pubmed({"terms": "tau"})'),
            LlmResponse(text="Thought: reflecting"),
            LlmResponse(text="Final Answer: tau spreads trans-synaptically"),
        ]
        results = []
        for _ in range(2):
            endpoint = make_mock_endpoint(list(script))
            results.append(run_react_loop(seed(), LoopConfig(endpoint=endpoint), fixture_tool, gw()))
        assert json.dumps(results[0].as_dict()) == json.dumps(results[1].as_dict())


class TestToolcallLoop:
    def config(self, endpoint, **kwargs) -> LoopConfig:
        return LoopConfig(endpoint=endpoint, tools=(SEARCH_TOOL,), **kwargs)

    def test_plain_completion_passthrough(self):
        endpoint = make_mock_endpoint([LlmResponse(text="a hypothesis")])
        result = run_toolcall_loop(seed(), self.config(endpoint), fixture_tool, gw())
        assert result.terminated_by == "final_marker"
        assert result.final_text == "a hypothesis"
        assert [s.kind for s in result.steps] == ["final"]

    def test_parallel_tool_calls_observed_before_next_model_call(self):
        calls = (
            ToolCall(call_id="c1", name="search_pubmed", arguments='{"terms": "a"}'),
            ToolCall(call_id="c2", name="search_pubmed", arguments='{"terms": "b"}'),
        )
        endpoint = make_mock_endpoint([
            LlmResponse(text="", tool_calls=calls, finish_reason="tool_call"),
            LlmResponse(text="synthesis"),
        ])
        result = run_toolcall_loop(seed(), self.config(endpoint), fixture_tool, gw())
        assert [s.kind for s in result.steps] == ["action", "observation", "action", "observation", "final"]
        second_call_messages = endpoint.calls[1][0]
        tool_msgs = [m for m in second_call_messages if m.role == "tool"]
        assert [m.tool_call_id for m in tool_msgs] == ["c1", "c2"]

    def test_unknown_tool_error_observation_then_finish(self):
        calls = (ToolCall(call_id="c9", name="launch_rocket", arguments="{}"),)
        endpoint = make_mock_endpoint([
            LlmResponse(text="", tool_calls=calls, finish_reason="tool_call"),
            LlmResponse(text="recovered"),
        ])
        result = run_toolcall_loop(seed(), self.config(endpoint), fixture_tool, gw())
        assert result.steps[1].content.startswith("ERROR:")
        assert result.final_text == "recovered"

    def test_step_cap(self):
        calls = (ToolCall(call_id="c1", name="search_pubmed", arguments='{"terms": "x"}'),)
        endpoint = make_mock_endpoint(
            [LlmResponse(text="", tool_calls=calls, finish_reason="tool_call")] * 4
        )
        result = run_toolcall_loop(seed(), self.config(endpoint, max_steps=2), fixture_tool, gw())
        assert result.terminated_by == "step_cap"
        assert result.model_calls == 2
        assert len(endpoint.calls) == 2

    def test_requires_tools(self):
        endpoint = make_mock_endpoint([LlmResponse(text="x")])
        with pytest.raises(ValueError):
            run_toolcall_loop(seed(), LoopConfig(endpoint=endpoint), fixture_tool, gw())

    def test_tools_attached_to_request(self):
        endpoint = make_mock_endpoint([LlmResponse(text="done")])
        run_toolcall_loop(seed(), self.config(endpoint), fixture_tool, gw())
        _, params = endpoint.calls[0]
        assert [t.name for t in params.tools] == ["search_pubmed"]


class TestLoopInvariants:
    def test_observations_never_fabricated(self):
        returns = []

        def recording_tool(name, args):
            value = f"obs-{len(returns)}"
            returns.append(value)
            return value

        endpoint = make_mock_endpoint([
            LlmResponse(text='Action: search_pubmed({"terms": "a"})'),
            LlmResponse(text='Action: search_pubmed({"terms": "b"})'),
            LlmResponse(text="Final Answer: done"),
        ])
        result = run_react_loop(seed(), LoopConfig(endpoint=endpoint), recording_tool, gw())
        observations = [s.content for s in result.steps if s.kind == "observation"]
        assert observations == returns

    def test_action_immediately_followed_by_observation(self):
        rng = random.Random(3)
        for _ in range(20):
            script = []
            for _ in range(rng.randint(1, 5)):
                script.append(LlmResponse(text=rng.choice([
                    'Action: search_pubmed({"terms": "x"})',
                    "Thought: mulling",
                ])))
            script.append(LlmResponse(text="Final Answer: end"))
            endpoint = make_mock_endpoint(script)
            config = LoopConfig(endpoint=endpoint, max_steps=rng.randint(1, 8))
            result = run_react_loop(seed(), config, fixture_tool, gw())
            for i, step in enumerate(result.steps):
                if step.kind == "action":
                    assert result.steps[i + 1].kind == "observation"
            assert result.model_calls <= config.max_steps


def test_action_step_requires_tool_name():
    with pytest.raises(ValueError):
        AgentStep(kind="action", content="x")


def test_dump_run_serializes_steps_with_run_id_and_timestamps(tmp_path):
    from hypobench.agents import dump_run

    endpoint = make_mock_endpoint([
        LlmResponse(text='Action: search_pubmed({"terms": "x"})'),
        LlmResponse(text="Final Answer: done"),
    ])
    result = run_react_loop(seed(), LoopConfig(endpoint=endpoint), fixture_tool, gw())

    ticks = iter(range(100))
    path = tmp_path / "run.jsonl"
    dump_run(result, path, run_id="run-7", timestamp=lambda: float(next(ticks)))

    records = [json.loads(l) for l in path.read_text().splitlines()]
    assert len(records) == len(result.steps) + 1  # one per step plus the run_end record
    assert all(r["run_id"] == "run-7" for r in records)
    assert [r["timestamp"] for r in records] == [float(i) for i in range(len(records))]
    assert [r["kind"] for r in records[:-1]] == [s.kind for s in result.steps]
    assert records[-1]["kind"] == "run_end"
    assert records[-1]["terminated_by"] == "final_marker"

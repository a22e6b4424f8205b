"""Declarative YAML configuration for the CLI and the HTTP service.

Schema (all sections optional unless a command needs them):

    data_dir: ./data                # session logs, reports, traces
    auth_token_env: HYPOBENCH_TOKEN # service bearer-token env var
    template_dir: ./my_templates    # prompt-template overrides (falls back per file)

    endpoints:
      gen:
        base_url: https://api.example/v1
        model_id: model-x
        api_key_env: OPENAI_API_KEY
        max_parallel: 4
        requests_per_minute: 60
      mock-gen:                     # scripted endpoint for dry runs
        kind: mock
        script: mock_replies.jsonl

    pubmed:
      cutoff_date: 2023-01-01
      fixture_dir: fixtures/pubmed  # replay transport; omit for live E-utilities
      max_results: 10

    experiment:
      pairs: pairs.jsonl
      output_dir: out
      generation_endpoint: gen
      judge_endpoint: judge         # omit to skip judging
      parallelism: 1
      rng_seed: 0
      temperature: 1.0
      max_tokens: 1024
      settings:
        - {label: zero_shot, mode: zero_shot}
        - {label: 5shot_random, mode: few_shot_random, k: 5}
        - {label: agent, kind: session, tool_use: none, max_rounds: 3}
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable

import yaml

from .corpus import DEFAULT_CUTOFF, parse_publication_date
from .errors import WorkbenchError
from .gateway import (
    LlmEndpoint,
    LlmRequestParams,
    LlmResponse,
    MockEndpoint,
    MockFailure,
    ToolCall,
)
from .harness import ExperimentConfig, SettingSpec
from .jsonio import read_jsonl
from .orchestrator import SessionConfig
from .toolbox import DEFAULT_MAX_RESULTS, EutilsTransport, FixtureTransport, PubMedClient, make_search_tool


class ConfigError(WorkbenchError):
    """A required config key is missing or malformed; the message names the key."""


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    data["_config_dir"] = str(path.parent)
    return data


def _resolve_path(config: dict[str, Any], raw: str) -> Path:
    base = Path(config.get("_config_dir", "."))
    path = Path(raw)
    return path if path.is_absolute() else base / path


def _require(mapping: dict[str, Any], key: str, context: str) -> Any:
    if key not in mapping or mapping[key] in (None, ""):
        raise ConfigError(f"missing config key: {context}.{key}")
    return mapping[key]


def load_mock_script(path: Path) -> list[Any]:
    """JSONL of scripted replies: {text, finish_reason?, tool_calls?} or {fail: {...}}."""
    entries: list[Any] = []
    for _, obj in read_jsonl(path):
        if "fail" in obj:
            fail = obj["fail"] or {}
            entries.append(MockFailure(status=fail.get("status", 500),
                                       body=fail.get("body", "scripted failure"),
                                       network=bool(fail.get("network", False))))
            continue
        tool_calls = tuple(
            ToolCall(call_id=tc.get("id", f"call_{i}"), name=tc["name"],
                     arguments=tc.get("arguments", "{}"))
            for i, tc in enumerate(obj.get("tool_calls") or [])
        )
        finish = obj.get("finish_reason") or ("tool_call" if tool_calls else "stop")
        entries.append(LlmResponse(text=obj.get("text", ""), tool_calls=tool_calls,
                                   finish_reason=finish))
    if not entries:
        raise ConfigError(f"mock script {path} is empty")
    return entries


def build_endpoint(name: str, spec: dict[str, Any], config: dict[str, Any]) -> LlmEndpoint:
    if not isinstance(spec, dict):
        raise ConfigError(f"endpoints.{name} must be a mapping")
    if spec.get("kind") == "mock":
        script_path = _resolve_path(config, _require(spec, "script", f"endpoints.{name}"))
        return MockEndpoint(load_mock_script(script_path), name=name,
                            model_id=spec.get("model_id", "mock-model"))
    return LlmEndpoint(
        name=name,
        base_url=_require(spec, "base_url", f"endpoints.{name}"),
        model_id=_require(spec, "model_id", f"endpoints.{name}"),
        api_key_env=spec.get("api_key_env", ""),
        max_parallel=int(spec.get("max_parallel", 4)),
        requests_per_minute=int(spec.get("requests_per_minute", 600)),
    )


def build_endpoints(config: dict[str, Any]) -> dict[str, LlmEndpoint]:
    return {
        name: build_endpoint(name, spec, config)
        for name, spec in (config.get("endpoints") or {}).items()
    }


def endpoint_by_name(endpoints: dict[str, LlmEndpoint], name: str) -> LlmEndpoint:
    if name not in endpoints:
        raise ConfigError(f"missing config key: endpoints.{name}")
    return endpoints[name]


def build_session_config(raw: dict[str, Any], seed_override: int | None = None) -> SessionConfig:
    return SessionConfig(
        max_rounds=int(raw.get("max_rounds", 3)),
        tool_use=raw.get("tool_use", "none"),
        human_gate=raw.get("human_gate", "off"),
        rng_seed=seed_override if seed_override is not None else int(raw.get("rng_seed", 0)),
    )


def build_settings(raw_settings: list[dict[str, Any]]) -> list[SettingSpec]:
    if not raw_settings:
        raise ConfigError("missing config key: experiment.settings")
    specs = []
    for i, raw in enumerate(raw_settings):
        label = _require(raw, "label", f"experiment.settings[{i}]")
        kind = raw.get("kind", "prompt")
        if kind == "session":
            specs.append(SettingSpec(label=label, kind="session",
                                     session=build_session_config(raw)))
        else:
            specs.append(SettingSpec(
                label=label, kind="prompt", mode=raw.get("mode", "zero_shot"),
                k=int(raw.get("k", 5)), instruction=raw.get("instruction"),
            ))
    return specs


def build_experiment(config: dict[str, Any], endpoints: dict[str, LlmEndpoint],
                     seed_override: int | None = None) -> ExperimentConfig:
    raw = config.get("experiment")
    if not isinstance(raw, dict):
        raise ConfigError("missing config key: experiment")
    generation = endpoint_by_name(endpoints, _require(raw, "generation_endpoint", "experiment"))
    judge = None
    if raw.get("judge_endpoint"):
        judge = endpoint_by_name(endpoints, raw["judge_endpoint"])
    return ExperimentConfig(
        pairs_path=_resolve_path(config, _require(raw, "pairs", "experiment")),
        output_dir=_resolve_path(config, _require(raw, "output_dir", "experiment")),
        settings=build_settings(raw.get("settings") or []),
        generation_endpoint=generation,
        judge_endpoint=judge,
        generation_params=LlmRequestParams(
            temperature=float(raw.get("temperature", 1.0)),
            max_tokens=int(raw.get("max_tokens", 1024)),
        ),
        parallelism=int(raw.get("parallelism", 1)),
        rng_seed=seed_override if seed_override is not None else int(raw.get("rng_seed", 0)),
        template_dir=template_dir(config),
    )


def build_search_tool(config: dict[str, Any]) -> Callable[[str, Any], str] | None:
    """PubMed executor from the pubmed section; fixture replay when configured."""
    raw = config.get("pubmed")
    if not isinstance(raw, dict):
        return None
    cutoff = DEFAULT_CUTOFF
    if raw.get("cutoff_date"):
        cutoff = parse_publication_date(str(raw["cutoff_date"]))
    if raw.get("fixture_dir"):
        transport = FixtureTransport.from_dir(_resolve_path(config, raw["fixture_dir"]))
    else:
        transport = EutilsTransport()
    client = PubMedClient(transport)
    return make_search_tool(client, cutoff,
                            default_max_results=int(raw.get("max_results", DEFAULT_MAX_RESULTS)))


def data_dir(config: dict[str, Any]) -> Path:
    return _resolve_path(config, config.get("data_dir", "./data"))


def template_dir(config: dict[str, Any]) -> Path | None:
    """Directory of prompt template overrides; packaged templates when absent."""
    raw = config.get("template_dir")
    return _resolve_path(config, raw) if raw else None

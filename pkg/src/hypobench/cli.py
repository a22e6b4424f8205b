"""Command-line interface.

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error
(argparse synopsis on stderr). Global flags: --config FILE, --trace [PATH],
--seed N.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import config as cfg
from .corpus import (
    CorpusConfig,
    export_instruction_pairs,
    ingest_literature,
    load_pairs,
    load_records,
    parse_publication_date,
    save_pairs,
    save_records,
    save_rejects,
    split_corpus,
    summarize_corpus,
)
from .errors import WorkbenchError
from .gateway import LlmGateway
from .harness import (
    analyze_uncertainty,
    compare_with_human,
    render_report,
    run_experiment,
    sample_for_human_eval,
)
from .judge import evaluate_hypothesis
from .orchestrator import (
    GATE_OFF,
    HumanDecision,
    Orchestrator,
    SessionStore,
    default_role_profiles,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypobench",
                                     description="Hypothesis generation and evaluation workbench")
    parser.add_argument("--config", metavar="FILE", help="YAML config file")
    parser.add_argument("--trace", metavar="PATH", nargs="?", const="trace.jsonl",
                        help="log request/response transcripts as JSONL")
    parser.add_argument("--seed", type=int, default=None, help="override configured RNG seed")
    commands = parser.add_subparsers(dest="command", required=True)

    corpus = commands.add_parser("corpus", help="literature corpus pipeline")
    corpus_sub = corpus.add_subparsers(dest="subcommand", required=True)

    p = corpus_sub.add_parser("ingest", help="read literature JSONL, report rejects")
    p.add_argument("--input", required=True)
    p.add_argument("--records-out", required=True)
    p.add_argument("--rejects-out")

    p = corpus_sub.add_parser("pairs", help="summarize records into background/hypothesis pairs")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", required=True, help="endpoint name from config")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--failures-out")

    p = corpus_sub.add_parser("split", help="split pairs by cutoff date")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--cutoff", default="2023-01-01")
    p.add_argument("--fraction", type=float, default=0.2)

    p = corpus_sub.add_parser("export", help="export instruction-tuning pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)

    p = commands.add_parser("run", help="run the configured experiment grid")

    session = commands.add_parser("session", help="multi-agent sessions")
    session_sub = session.add_subparsers(dest="subcommand", required=True)

    p = session_sub.add_parser("start", help="start one session")
    p.add_argument("--background-file", required=True)
    p.add_argument("--endpoint", required=True, help="endpoint name from config")
    p.add_argument("--id", dest="session_id")
    p.add_argument("--max-rounds", type=int, default=3)
    p.add_argument("--tool-use", default="none", choices=["none", "react", "toolcall"])
    p.add_argument("--human-gate", default=GATE_OFF, choices=["off", "on_critic", "on_final"])

    p = session_sub.add_parser("resume", help="apply a human decision to a paused session")
    p.add_argument("--id", dest="session_id", required=True)
    p.add_argument("--endpoint", required=True, help="endpoint name from config")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--approve", action="store_true")
    group.add_argument("--override-feedback", metavar="TEXT")
    group.add_argument("--inject-hypothesis", metavar="TEXT")

    p = session_sub.add_parser("show", help="print a session transcript")
    p.add_argument("--id", dest="session_id", required=True)

    p = commands.add_parser("judge", help="score one background/hypothesis pair")
    p.add_argument("--background-file", required=True)
    p.add_argument("--hypothesis-file", required=True)
    p.add_argument("--endpoint", required=True, help="endpoint name from config")

    analyze = commands.add_parser("analyze", help="analyses over a results file")
    analyze_sub = analyze.add_subparsers(dest="subcommand", required=True)

    p = analyze_sub.add_parser("uncertainty", help="SelfBLEU and facet-mean correlations")
    p.add_argument("--results", required=True)
    p.add_argument("--out")

    p = analyze_sub.add_parser("agreement", help="judge vs human correlation per facet")
    p.add_argument("--results", required=True)
    p.add_argument("--sheet", required=True)
    p.add_argument("--threshold", type=float, default=0.7)

    p = analyze_sub.add_parser("sample", help="draw the human-evaluation annotation sheet")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("-n", type=int, default=100)

    p = commands.add_parser("report", help="render CSV + HTML report")
    p.add_argument("--results", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sheet", help="completed annotation sheet for the agreement table")

    p = commands.add_parser("serve", help="start the HTTP service")
    p.add_argument("--bind", default="127.0.0.1:8355")

    return parser


def _gateway(args) -> LlmGateway:
    return LlmGateway(trace_path=args.trace)


def _config(args) -> dict:
    if not args.config:
        raise cfg.ConfigError("this command needs --config FILE")
    return cfg.load_config(args.config)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False, default=str))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "corpus":
        return _corpus(args)
    if args.command == "run":
        return _run(args)
    if args.command == "session":
        return _session(args)
    if args.command == "judge":
        return _judge(args)
    if args.command == "analyze":
        return _analyze(args)
    if args.command == "report":
        return _report(args)
    if args.command == "serve":
        return _serve(args)
    raise AssertionError(f"unhandled command {args.command}")


def _corpus(args) -> int:
    if args.subcommand == "ingest":
        result = ingest_literature(args.input)
        save_records(result.records, args.records_out)
        if args.rejects_out:
            save_rejects(result.rejects, args.rejects_out)
        _print({"records": len(result.records), "rejects": len(result.rejects)})
        return 0
    if args.subcommand == "pairs":
        config = _config(args)
        endpoints = cfg.build_endpoints(config)
        endpoint = cfg.endpoint_by_name(endpoints, args.endpoint)
        records = load_records(args.records)
        pairs, failures = summarize_corpus(records, endpoint, _gateway(args),
                                           parallelism=args.parallelism)
        save_pairs(pairs, args.out)
        if args.failures_out:
            save_rejects(failures, args.failures_out)
        _print({"pairs": len(pairs), "failures": len(failures)})
        return 0
    if args.subcommand == "split":
        pairs = load_pairs(args.pairs)
        corpus_config = CorpusConfig(
            cutoff_date=parse_publication_date(args.cutoff),
            seen_test_fraction=args.fraction,
            rng_seed=args.seed or 0,
        )
        split = split_corpus(pairs, corpus_config)
        out_dir = Path(args.out_dir)
        counts = {}
        for name, subset in (("train", split.train), ("seen_test", split.seen_test),
                             ("unseen_test", split.unseen_test)):
            save_pairs(subset, out_dir / f"{name}.jsonl")
            counts[name] = len(subset)
        _print(counts)
        return 0
    if args.subcommand == "export":
        pairs = load_pairs(args.pairs)
        count = export_instruction_pairs(pairs, args.out)
        _print({"written": count})
        return 0
    raise AssertionError


def _run(args) -> int:
    config = _config(args)
    endpoints = cfg.build_endpoints(config)
    experiment = cfg.build_experiment(config, endpoints, seed_override=args.seed)
    tool = cfg.build_search_tool(config)
    path = run_experiment(experiment, _gateway(args), tool_executor=tool)
    _print({"results": str(path)})
    return 0


def _session_orchestrator(args, config) -> Orchestrator:
    store = SessionStore(cfg.data_dir(config) / "sessions")
    return Orchestrator(gateway=_gateway(args), store=store,
                        tool_executor=cfg.build_search_tool(config))


def _session(args) -> int:
    config = _config(args)
    orchestrator = _session_orchestrator(args, config)
    if args.subcommand == "start":
        endpoints = cfg.build_endpoints(config)
        endpoint = cfg.endpoint_by_name(endpoints, args.endpoint)
        roles = default_role_profiles(endpoint, template_dir=cfg.template_dir(config))
        session_config = cfg.build_session_config(
            {"max_rounds": args.max_rounds, "tool_use": args.tool_use,
             "human_gate": args.human_gate},
            seed_override=args.seed,
        )
        background = Path(args.background_file).read_text(encoding="utf-8").strip()
        transcript = orchestrator.run_session(background, roles, session_config,
                                              session_id=args.session_id)
        _print({"session_id": transcript.session_id, "status": transcript.status,
                "final_hypothesis": transcript.final_hypothesis})
        return 0
    if args.subcommand == "resume":
        endpoints = cfg.build_endpoints(config)
        endpoint = cfg.endpoint_by_name(endpoints, args.endpoint)
        orchestrator.rehydrate(
            args.session_id,
            default_role_profiles(endpoint, template_dir=cfg.template_dir(config)),
        )
        if args.approve:
            decision = HumanDecision(kind="approve")
        elif args.override_feedback:
            decision = HumanDecision(kind="override_feedback", text=args.override_feedback)
        else:
            decision = HumanDecision(kind="inject_hypothesis", text=args.inject_hypothesis)
        transcript = orchestrator.resume_with_decision(args.session_id, decision)
        _print({"session_id": transcript.session_id, "status": transcript.status,
                "final_hypothesis": transcript.final_hypothesis})
        return 0
    if args.subcommand == "show":
        transcript = orchestrator.transcript(args.session_id)
        _print(transcript.as_dict())
        return 0
    raise AssertionError


def _judge(args) -> int:
    config = _config(args)
    endpoints = cfg.build_endpoints(config)
    endpoint = cfg.endpoint_by_name(endpoints, args.endpoint)
    background = Path(args.background_file).read_text(encoding="utf-8").strip()
    hypothesis = Path(args.hypothesis_file).read_text(encoding="utf-8").strip()
    evaluation = evaluate_hypothesis(background, hypothesis, endpoint, gateway=_gateway(args))
    _print({"scores": evaluation.scores.as_dict(), "attempts": evaluation.attempts})
    return 0


def _analyze(args) -> int:
    if args.subcommand == "uncertainty":
        report = analyze_uncertainty(args.results)
        payload = asdict(report)
        if args.out:
            Path(args.out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
        _print(payload)
        return 0
    if args.subcommand == "agreement":
        report = compare_with_human(args.results, args.sheet, threshold=args.threshold)
        _print(asdict(report))
        return 0
    if args.subcommand == "sample":
        path = sample_for_human_eval(args.results, args.out, n=args.n, seed=args.seed or 0)
        _print({"sheet": str(path)})
        return 0
    raise AssertionError


def _report(args) -> int:
    uncertainty = analyze_uncertainty(args.results)
    agreement = None
    if args.sheet:
        agreement = compare_with_human(args.results, args.sheet)
    out = render_report(args.results, args.out_dir, uncertainty=uncertainty, agreement=agreement)
    _print({"report": str(out)})
    return 0


def _serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = _config(args)
    host, _, port = args.bind.rpartition(":")
    app = create_app(ServiceConfig.from_config(config, trace_path=args.trace))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Batch experiment runner and analyses.

run_experiment walks every (test pair x setting) cell, generates a hypothesis
through prompts or multi-agent sessions, scores it against the gold text,
optionally judges it, and appends one record per cell to an append-only
results JSONL. Reruns skip already-recorded cells, so interrupted runs resume
cleanly. Analyses are pure functions over the written file.
"""

from __future__ import annotations

import csv
import hashlib
import html
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Any, Callable

from . import metrics
from .corpus import SPLIT_SEEN, SPLIT_TRAIN, SPLIT_UNSEEN, BackgroundHypothesisPair, load_pairs
from .errors import WorkbenchError
from .gateway import LlmEndpoint, LlmGateway, LlmRequestParams
from .jsonio import append_jsonl, read_jsonl
from .judge import FACETS, evaluate_hypothesis
from .metrics import ZeroVariance, compute_report, pearson, spearman, tokenize
from .orchestrator import (
    STATUS_ACCEPTED,
    STATUS_EXHAUSTED,
    Orchestrator,
    SessionConfig,
    SessionStore,
    default_role_profiles,
)
from .prompting import (
    MODE_FEW_SHOT_RANDOM,
    MODE_FEW_SHOT_RETRIEVAL,
    MODE_ZERO_SHOT,
    PromptSpec,
    PromptTemplates,
    build_generation_prompt,
    default_instruction,
    extract_hypothesis,
    select_shots_random,
    select_shots_similar,
    tfidf_index,
)

AGREEMENT_THRESHOLD = 0.7
ANNOTATORS = (1, 2, 3)


class NotEnoughRecords(WorkbenchError):
    pass


class JoinFailure(WorkbenchError):
    def __init__(self, pair_id: str):
        super().__init__(f"annotation row {pair_id!r} matches no judged result record")
        self.pair_id = pair_id


class IncompleteAnnotation(WorkbenchError):
    def __init__(self, row: int, blanks: list[str]):
        super().__init__(f"annotation row {row} has blank fields: {', '.join(blanks)}")
        self.row = row
        self.blanks = blanks


@dataclass(frozen=True)
class SettingSpec:
    """One experiment arm: a prompting regime or a multi-agent session shape."""

    label: str
    kind: str = "prompt"  # prompt | session
    mode: str = MODE_ZERO_SHOT
    k: int = 5
    instruction: str | None = None
    session: SessionConfig | None = None

    def __post_init__(self):
        if self.kind not in ("prompt", "session"):
            raise ValueError(f"unknown setting kind {self.kind!r}")
        if self.kind == "session" and self.session is None:
            object.__setattr__(self, "session", SessionConfig())


@dataclass
class ExperimentConfig:
    pairs_path: Path
    output_dir: Path
    settings: list[SettingSpec]
    generation_endpoint: LlmEndpoint
    judge_endpoint: LlmEndpoint | None = None
    generation_params: LlmRequestParams = field(default_factory=LlmRequestParams)
    parallelism: int = 1
    rng_seed: int = 0
    template_dir: Path | None = None  # overrides the packaged prompt templates

    def __post_init__(self):
        self.pairs_path = Path(self.pairs_path)
        self.output_dir = Path(self.output_dir)
        if self.template_dir is not None:
            self.template_dir = Path(self.template_dir)
        if not self.settings:
            raise ValueError("at least one setting is required")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


def _cell_seed(base: int, pair_id: str, label: str) -> int:
    digest = hashlib.sha256(f"{base}:{label}:{pair_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def results_path_for(config: ExperimentConfig) -> Path:
    return config.output_dir / "results.jsonl"


def run_experiment(config: ExperimentConfig, gateway: LlmGateway | None = None,
                   clock: Callable[[], float] = time.time,
                   tool_executor: Callable[[str, Any], str] | None = None) -> Path:
    """Fill the (test pair x setting) grid; returns the results file path."""
    gateway = gateway or LlmGateway()
    pairs = load_pairs(config.pairs_path)
    train = [p for p in pairs if p.split == SPLIT_TRAIN]
    test = [p for p in pairs if p.split in (SPLIT_SEEN, SPLIT_UNSEEN)]
    if not test:
        raise WorkbenchError("no test pairs (seen_test/unseen_test) in the dataset")

    index = None
    if any(s.kind == "prompt" and s.mode == MODE_FEW_SHOT_RETRIEVAL for s in config.settings):
        index = tfidf_index(train)

    config.output_dir.mkdir(parents=True, exist_ok=True)
    results_path = results_path_for(config)
    completed: set[tuple[str, str]] = set()
    if results_path.is_file():
        for _, record in read_jsonl(results_path):
            completed.add((record["pair_id"], record["setting"]))

    orchestrator = Orchestrator(
        gateway=gateway,
        store=SessionStore(config.output_dir / "sessions"),
        tool_executor=tool_executor,
    )
    write_lock = threading.Lock()

    def run_cell(cell: tuple[BackgroundHypothesisPair, SettingSpec]) -> None:
        pair, setting = cell
        started = clock()
        record: dict[str, Any] = {
            "pair_id": pair.pair_id,
            "split": pair.split,
            "setting": setting.label,
            "model": config.generation_endpoint.name,
            "background": pair.background,
            "generated_hypothesis": None,
            "prompt_digest": None,
            "metrics": None,
            "facets": None,
            "transcript_ref": None,
            "timing": {"started": started, "elapsed": None},
            "error": None,
        }
        try:
            generated, digest, transcript_ref = _generate(
                pair, setting, config, gateway, orchestrator, train, index
            )
            record["generated_hypothesis"] = generated
            record["prompt_digest"] = digest
            record["transcript_ref"] = transcript_ref
            record["metrics"] = compute_report(generated, pair.hypothesis).as_dict()
            if config.judge_endpoint is not None:
                evaluation = evaluate_hypothesis(
                    pair.background, generated, config.judge_endpoint, gateway=gateway
                )
                record["facets"] = evaluation.scores.as_dict()
                record["judge_attempts"] = evaluation.attempts
        except WorkbenchError as exc:
            record["error"] = f"{type(exc).__name__}: {exc}"
        record["timing"]["elapsed"] = clock() - started
        with write_lock:
            append_jsonl(results_path, record)

    cells = [
        (pair, setting)
        for setting in config.settings
        for pair in test
        if (pair.pair_id, setting.label) not in completed
    ]
    if config.parallelism <= 1:
        for cell in cells:
            run_cell(cell)
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            list(pool.map(run_cell, cells))
    return results_path


def _generate(pair: BackgroundHypothesisPair, setting: SettingSpec, config: ExperimentConfig,
              gateway: LlmGateway, orchestrator: Orchestrator,
              train: list[BackgroundHypothesisPair], index) -> tuple[str, str, str | None]:
    if setting.kind == "session":
        session_id = f"{setting.label}--{pair.pair_id}"
        roles = default_role_profiles(config.generation_endpoint, params=config.generation_params,
                                      template_dir=config.template_dir)
        transcript = orchestrator.run_session(pair.background, roles, setting.session,
                                              session_id=session_id)
        if transcript.status not in (STATUS_ACCEPTED, STATUS_EXHAUSTED) or not transcript.final_hypothesis:
            raise WorkbenchError(f"session ended {transcript.status}: {transcript.error or 'no hypothesis'}")
        return transcript.final_hypothesis, None, session_id

    instruction = setting.instruction or default_instruction()
    spec = PromptSpec(mode=setting.mode, instruction=instruction, k=setting.k,
                      rng_seed=config.rng_seed)
    shots = None
    if setting.mode == MODE_FEW_SHOT_RANDOM:
        selection = select_shots_random(
            train, setting.k, seed=_cell_seed(config.rng_seed, pair.pair_id, setting.label)
        )
        by_id = {p.pair_id: p for p in train}
        shots = [by_id[pid] for pid in selection.pair_ids]
    elif setting.mode == MODE_FEW_SHOT_RETRIEVAL:
        selection = select_shots_similar(index, pair.background, setting.k,
                                         exclude_pair_id=pair.pair_id)
        shots = [index.pair(pid) for pid in selection.pair_ids]

    templates = PromptTemplates(config.template_dir) if config.template_dir else None
    messages = build_generation_prompt(spec, pair.background, shots=shots, templates=templates)
    digest = hashlib.sha256(
        "\x1e".join(f"{m.role}:{m.content}" for m in messages).encode("utf-8")
    ).hexdigest()[:16]
    reply = gateway.complete(config.generation_endpoint, messages, config.generation_params)
    generated = extract_hypothesis(reply.text)
    if not generated:
        raise WorkbenchError("model returned an empty hypothesis")
    return generated, digest, None


# -- analyses --

def load_results(results_path: str | Path) -> list[dict[str, Any]]:
    return [record for _, record in read_jsonl(results_path)]


@dataclass
class UncertaintyReport:
    groups: list[dict[str, Any]] = field(default_factory=list)
    correlations: dict[str, dict[str, float]] = field(default_factory=dict)
    skipped: list[dict[str, str]] = field(default_factory=list)


def analyze_uncertainty(results_path: str | Path,
                        min_group_size: int = 2) -> UncertaintyReport:
    """Per (model, setting): SelfBLEU and facet means; across groups: correlations."""
    report = UncertaintyReport()
    grouped: dict[tuple[str, str], list[dict[str, Any]]] = {}
    for record in load_results(results_path):
        if record.get("error") or not record.get("generated_hypothesis"):
            continue
        if not record.get("facets"):
            continue
        grouped.setdefault((record["model"], record["setting"]), []).append(record)

    for (model, setting), records in sorted(grouped.items()):
        if len(records) < min_group_size:
            report.skipped.append({"model": model, "setting": setting,
                                   "reason": f"group has {len(records)} records"})
            continue
        hypotheses = [tokenize(r["generated_hypothesis"]) for r in records]
        row: dict[str, Any] = {
            "model": model,
            "setting": setting,
            "count": len(records),
            "self_bleu": metrics.self_bleu(hypotheses),
        }
        for facet in FACETS:
            row[f"mean_{facet}"] = fmean(r["facets"][facet] for r in records)
        report.groups.append(row)

    if len(report.groups) >= 2:
        self_bleus = [g["self_bleu"] for g in report.groups]
        for facet in ("novelty", "verifiability"):
            means = [g[f"mean_{facet}"] for g in report.groups]
            try:
                report.correlations[facet] = {
                    "pearson": pearson(self_bleus, means),
                    "spearman": spearman(self_bleus, means),
                }
            except ZeroVariance:
                report.skipped.append({"model": "*", "setting": "*",
                                       "reason": f"zero variance for {facet} correlation"})
    return report


def annotation_fieldnames() -> list[str]:
    names = ["pair_id", "background", "hypothesis"]
    for facet in FACETS:
        for annotator in ANNOTATORS:
            names.append(f"{facet}_{annotator}")
    return names


def sample_for_human_eval(results_path: str | Path, out_path: str | Path,
                          n: int = 100, seed: int = 0) -> Path:
    """Seeded sample of n unseen-split records as a blank 3-annotator sheet."""
    candidates = [
        r for r in load_results(results_path)
        if r.get("split") == SPLIT_UNSEEN and not r.get("error") and r.get("generated_hypothesis")
    ]
    if len(candidates) < n:
        raise NotEnoughRecords(f"need {n} unseen records, results hold {len(candidates)}")
    sampled = random.Random(seed).sample(candidates, n)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=annotation_fieldnames())
        writer.writeheader()
        for record in sampled:
            row = {name: "" for name in annotation_fieldnames()}
            row["pair_id"] = record["pair_id"]
            row["background"] = record["background"]
            row["hypothesis"] = record["generated_hypothesis"]
            writer.writerow(row)
    return out_path


def ingest_human_scores(sheet_path: str | Path) -> list[dict[str, Any]]:
    """Read a completed sheet; every facet cell must hold an integer 0..3."""
    rows: list[dict[str, Any]] = []
    with Path(sheet_path).open("r", encoding="utf-8", newline="") as fh:
        for row_no, row in enumerate(csv.DictReader(fh), start=1):
            blanks = []
            parsed: dict[str, Any] = {
                "pair_id": row.get("pair_id", ""),
                "background": row.get("background", ""),
                "hypothesis": row.get("hypothesis", ""),
            }
            for facet in FACETS:
                for annotator in ANNOTATORS:
                    key = f"{facet}_{annotator}"
                    raw = (row.get(key) or "").strip()
                    if raw == "":
                        blanks.append(key)
                        continue
                    try:
                        value = int(raw)
                    except ValueError:
                        blanks.append(key)
                        continue
                    if not 0 <= value <= 3:
                        blanks.append(key)
                        continue
                    parsed[key] = value
            if blanks:
                raise IncompleteAnnotation(row_no, blanks)
            rows.append(parsed)
    return rows


@dataclass
class AgreementReport:
    rows: list[dict[str, Any]] = field(default_factory=list)  # facet, pearson, spearman, passed
    threshold: float = AGREEMENT_THRESHOLD

    def all_pass(self) -> bool:
        return bool(self.rows) and all(r["passed"] for r in self.rows)


def compare_with_human(results_path: str | Path, sheet_path: str | Path,
                       threshold: float = AGREEMENT_THRESHOLD) -> AgreementReport:
    """Per facet: correlation of judge scores with the mean of three annotators."""
    annotations = ingest_human_scores(sheet_path)
    judged = [r for r in load_results(results_path) if r.get("facets")]
    by_pair: dict[str, list[dict[str, Any]]] = {}
    for record in judged:
        by_pair.setdefault(record["pair_id"], []).append(record)

    joined: list[tuple[dict[str, Any], dict[str, Any]]] = []
    for row in annotations:
        matches = by_pair.get(row["pair_id"], [])
        if len(matches) > 1:  # several settings share the pair; the hypothesis disambiguates
            matches = [m for m in matches if m["generated_hypothesis"] == row["hypothesis"]]
        if not matches:
            raise JoinFailure(row["pair_id"])
        joined.append((row, matches[0]))

    report = AgreementReport(threshold=threshold)
    for facet in FACETS:
        human = [fmean(row[f"{facet}_{a}"] for a in ANNOTATORS) for row, _ in joined]
        machine = [float(record["facets"][facet]) for _, record in joined]
        p = pearson(human, machine)
        s = spearman(human, machine)
        report.rows.append({
            "facet": facet,
            "pearson": p,
            "spearman": s,
            "passed": p > threshold and s > threshold,
        })
    return report


# -- report rendering --

def render_report(results_path: str | Path, out_dir: str | Path,
                  uncertainty: UncertaintyReport | None = None,
                  agreement: AgreementReport | None = None) -> Path:
    """Write summary.csv, uncertainty.csv, agreement.csv, and index.html."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = [r for r in load_results(results_path) if not r.get("error")]

    summary_rows = _summary_rows(records)
    _write_csv(out_dir / "summary.csv", summary_rows, [
        "setting", "split", "count", "mean_bleu", "mean_rouge1_f", "mean_rouge2_f",
        "mean_rougeL_f", "mean_novelty", "mean_relevance", "mean_significance",
        "mean_verifiability",
    ])

    uncertainty_rows: list[dict[str, Any]] = []
    if uncertainty is not None:
        for group in uncertainty.groups:
            uncertainty_rows.append({"row_type": "group", **group})
        for facet, coefficients in sorted(uncertainty.correlations.items()):
            uncertainty_rows.append({
                "row_type": "correlation", "model": "*", "setting": f"self_bleu~mean_{facet}",
                "count": len(uncertainty.groups),
                "pearson": coefficients["pearson"], "spearman": coefficients["spearman"],
            })
    _write_csv(out_dir / "uncertainty.csv", uncertainty_rows, [
        "row_type", "model", "setting", "count", "self_bleu",
        "mean_novelty", "mean_relevance", "mean_significance", "mean_verifiability",
        "pearson", "spearman",
    ])

    agreement_rows = [] if agreement is None else [dict(r) for r in agreement.rows]
    _write_csv(out_dir / "agreement.csv", agreement_rows,
               ["facet", "pearson", "spearman", "passed"])

    (out_dir / "index.html").write_text(
        _render_html(summary_rows, uncertainty_rows, agreement_rows), encoding="utf-8"
    )
    return out_dir


def _summary_rows(records: list[dict[str, Any]]) -> list[dict[str, Any]]:
    grouped: dict[tuple[str, str], list[dict[str, Any]]] = {}
    for record in records:
        grouped.setdefault((record["setting"], record["split"]), []).append(record)
    rows = []
    for (setting, split), group in sorted(grouped.items()):
        row: dict[str, Any] = {"setting": setting, "split": split, "count": len(group)}
        scored = [r for r in group if r.get("metrics")]
        for key in ("bleu", "rouge1_f", "rouge2_f", "rougeL_f"):
            row[f"mean_{key}"] = fmean(r["metrics"][key] for r in scored) if scored else ""
        judged = [r for r in group if r.get("facets")]
        for facet in FACETS:
            row[f"mean_{facet}"] = fmean(r["facets"][facet] for r in judged) if judged else ""
        rows.append(row)
    return rows


def _write_csv(path: Path, rows: list[dict[str, Any]], fieldnames: list[str]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(row.get(k, "")) for k in fieldnames})


def _format_cell(value: Any) -> Any:
    if isinstance(value, float):
        return f"{value:.10g}"
    return value


def _render_html(summary: list[dict], uncertainty: list[dict], agreement: list[dict]) -> str:
    parts = [
        "<!doctype html><html><head><meta charset='utf-8'><title>Experiment report</title>",
        "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin:1em 0}",
        "td,th{border:1px solid #999;padding:4px 8px;text-align:left}caption{font-weight:bold}</style>",
        "</head><body><h1>Experiment report</h1>",
        _html_table("Per-setting summary (seen vs unseen)", summary),
        _html_table("Uncertainty groups and correlations", uncertainty),
        _html_table("Judge vs human agreement", agreement),
        _scatter_svg([r for r in uncertainty if r.get("row_type") == "group"]),
        "</body></html>",
    ]
    return "".join(parts)


def _html_table(caption: str, rows: list[dict[str, Any]]) -> str:
    if not rows:
        return f"<table><caption>{html.escape(caption)}</caption><tr><td>(no rows)</td></tr></table>"
    columns = list(rows[0].keys())
    head = "".join(f"<th>{html.escape(str(c))}</th>" for c in columns)
    body = "".join(
        "<tr>" + "".join(f"<td>{html.escape(str(_format_cell(r.get(c, ''))))}</td>" for c in columns) + "</tr>"
        for r in rows
    )
    return f"<table><caption>{html.escape(caption)}</caption><tr>{head}</tr>{body}</table>"


def _scatter_svg(groups: list[dict[str, Any]]) -> str:
    """Inline scatter of self_bleu (x) against mean novelty and verifiability (y)."""
    if not groups:
        return ""
    width, height, pad = 420, 260, 36
    points = []
    for facet, color in (("mean_novelty", "#c0392b"), ("mean_verifiability", "#2980b9")):
        for g in groups:
            x = pad + g["self_bleu"] * (width - 2 * pad)
            y = height - pad - (g[facet] / 3.0) * (height - 2 * pad)
            points.append(
                f"<circle cx='{x:.1f}' cy='{y:.1f}' r='4' fill='{color}'>"
                f"<title>{html.escape(g['setting'])} {facet}={g[facet]:.2f}</title></circle>"
            )
    return (
        f"<h2>SelfBLEU vs facet means</h2><svg width='{width}' height='{height}' "
        "xmlns='http://www.w3.org/2000/svg' style='border:1px solid #ccc'>"
        f"<line x1='{pad}' y1='{height - pad}' x2='{width - pad}' y2='{height - pad}' stroke='#333'/>"
        f"<line x1='{pad}' y1='{pad}' x2='{pad}' y2='{height - pad}' stroke='#333'/>"
        f"<text x='{width // 2}' y='{height - 8}' font-size='11'>self_bleu (0..1)</text>"
        f"<text x='6' y='{pad - 10}' font-size='11'>facet mean (0..3)</text>"
        + "".join(points)
        + "<circle cx='300' cy='20' r='4' fill='#c0392b'/><text x='308' y='24' font-size='11'>novelty</text>"
        + "<circle cx='300' cy='36' r='4' fill='#2980b9'/><text x='308' y='40' font-size='11'>verifiability</text>"
        + "</svg>"
    )

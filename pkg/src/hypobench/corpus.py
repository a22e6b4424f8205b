"""Literature corpus construction.

Ingests literature records from JSONL, turns abstracts into
background/hypothesis pairs through an LLM endpoint, filters by publisher
allowlist, and splits by publication-date cutoff so post-cutoff pairs are
never visible to training or few-shot selection.

Date handling: ISO YYYY-MM-DD and YYYY-MM (normalized to day 01) are
accepted; anything else is rejected.
"""

from __future__ import annotations

import json
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import WorkbenchError
from .gateway import ChatMessage, GatewayError, LlmEndpoint, LlmGateway, LlmRequestParams
from .jsonio import read_jsonl, write_jsonl

SPLIT_TRAIN = "train"
SPLIT_SEEN = "seen_test"
SPLIT_UNSEEN = "unseen_test"
SPLITS = (SPLIT_TRAIN, SPLIT_SEEN, SPLIT_UNSEEN)

DEFAULT_CUTOFF = date(2023, 1, 1)

_BACKGROUND_LABEL = "BACKGROUND:"
_HYPOTHESIS_LABEL = "HYPOTHESIS:"

_EXTRACTION_SYSTEM = (
    "You split a medical paper abstract into two parts. First the background: "
    "the established knowledge and motivating observations. Then the central "
    "hypothesis: the single claim the work proposes or tests. The background "
    "must not restate the hypothesis. Reply with exactly two labeled blocks:\n"
    f"{_BACKGROUND_LABEL} <background text>\n{_HYPOTHESIS_LABEL} <hypothesis text>"
)


class FileUnreadable(WorkbenchError):
    pass


class FileUnwritable(WorkbenchError):
    pass


class MalformedRecord(WorkbenchError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ExtractionRejected(WorkbenchError):
    """The LLM reply could not be parsed into the two labeled fields."""


class EndpointFailure(WorkbenchError):
    """The summarization endpoint failed past the gateway's retry policy."""


class DanglingSourceReference(WorkbenchError):
    pass


@dataclass(frozen=True)
class LiteratureRecord:
    id: str
    title: str
    abstract: str
    publication_date: date
    venue: str
    topic_tags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be nonempty")

    def as_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "abstract": self.abstract,
            "publication_date": self.publication_date.isoformat(),
            "venue": self.venue,
            "topic_tags": list(self.topic_tags),
        }


@dataclass(frozen=True)
class BackgroundHypothesisPair:
    pair_id: str
    background: str
    hypothesis: str
    source_record_id: str
    publication_date: date
    split: str | None = None  # unassigned until split_corpus runs

    def __post_init__(self):
        if not self.background or not self.hypothesis:
            raise ValueError("background and hypothesis must be nonempty")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    def as_dict(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "background": self.background,
            "hypothesis": self.hypothesis,
            "source_record_id": self.source_record_id,
            "publication_date": self.publication_date.isoformat(),
            "split": self.split,
        }


@dataclass(frozen=True)
class CorpusConfig:
    cutoff_date: date = DEFAULT_CUTOFF
    publisher_allowlist: tuple[str, ...] = ()
    seen_test_fraction: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.seen_test_fraction < 1.0:
            raise ValueError("seen_test_fraction must be in (0, 1)")


@dataclass
class IngestResult:
    records: list[LiteratureRecord] = field(default_factory=list)
    rejects: list[dict[str, Any]] = field(default_factory=list)  # {line, reason}


@dataclass
class CorpusSplit:
    train: list[BackgroundHypothesisPair]
    seen_test: list[BackgroundHypothesisPair]
    unseen_test: list[BackgroundHypothesisPair]

    def all_pairs(self) -> list[BackgroundHypothesisPair]:
        return [*self.train, *self.seen_test, *self.unseen_test]


_DATE_FULL = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_DATE_MONTH = re.compile(r"^(\d{4})-(\d{2})$")


def parse_publication_date(raw: str) -> date:
    """Accept YYYY-MM-DD or YYYY-MM (day defaults to 01); reject anything else."""
    if not isinstance(raw, str):
        raise ValueError(f"publication_date must be a string, got {type(raw).__name__}")
    try:
        m = _DATE_FULL.match(raw.strip())
        if m:
            return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
        m = _DATE_MONTH.match(raw.strip())
        if m:
            return date(int(m.group(1)), int(m.group(2)), 1)
    except ValueError as exc:
        raise ValueError(f"invalid calendar date {raw!r}: {exc}") from exc
    raise ValueError(f"unparseable publication_date {raw!r}")


def ingest_literature(path: str | Path, format: str = "jsonl") -> IngestResult:
    """Read literature records; invalid lines land in the rejects report with line numbers."""
    if format != "jsonl":
        raise ValueError(f"unsupported format {format!r}")
    path = Path(path)
    if not path.is_file():
        raise FileUnreadable(f"cannot read {path}")

    result = IngestResult()
    seen_ids: set[str] = set()
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FileUnreadable(str(exc)) from exc

    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = _parse_record_line(line, seen_ids)
        except ValueError as exc:
            result.rejects.append({"line": line_no, "reason": str(exc)})
            continue
        seen_ids.add(record.id)
        result.records.append(record)
    return result


def _parse_record_line(line: str, seen_ids: set[str]) -> LiteratureRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValueError("line is not an object")
    missing = [k for k in ("id", "title", "abstract", "publication_date", "venue") if k not in obj]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    record_id = str(obj["id"])
    if not record_id:
        raise ValueError("empty id")
    if record_id in seen_ids:
        raise ValueError(f"duplicate id {record_id!r}")
    return LiteratureRecord(
        id=record_id,
        title=str(obj["title"]),
        abstract=str(obj["abstract"]),
        publication_date=parse_publication_date(obj["publication_date"]),
        venue=str(obj["venue"]),
        topic_tags=tuple(str(t) for t in obj.get("topic_tags") or ()),
    )


def summarize_to_pair(record: LiteratureRecord, endpoint: LlmEndpoint,
                      gateway: LlmGateway | None = None, *, retries: int = 2,
                      params: LlmRequestParams | None = None) -> BackgroundHypothesisPair:
    """Ask the endpoint to split an abstract into a labeled background/hypothesis pair.

    Retries up to `retries` extra times when the reply misses a label or the
    background restates the hypothesis; raises ExtractionRejected after that.
    """
    if not record.abstract.strip():
        raise ValueError(f"record {record.id} has an empty abstract")
    gateway = gateway or LlmGateway()
    params = params or LlmRequestParams(temperature=0.0, max_tokens=1024)
    messages = [
        ChatMessage(role="system", content=_EXTRACTION_SYSTEM),
        ChatMessage(role="user", content=f"Title: {record.title}\n\nAbstract:\n{record.abstract}"),
    ]
    failures: list[str] = []
    for _ in range(retries + 1):
        try:
            reply = gateway.complete(endpoint, messages, params)
        except GatewayError as exc:
            raise EndpointFailure(f"record {record.id}: {exc}") from exc
        parsed = _parse_labeled_pair(reply.text)
        if parsed is not None:
            background, hypothesis = parsed
            return BackgroundHypothesisPair(
                pair_id=f"pair-{record.id}",
                background=background,
                hypothesis=hypothesis,
                source_record_id=record.id,
                publication_date=record.publication_date,
            )
        failures.append(reply.text)
        messages = messages + [
            ChatMessage(role="assistant", content=reply.text or "(empty)"),
            ChatMessage(
                role="user",
                content=(
                    "That reply was not usable. Respond again with exactly the two "
                    f"labeled blocks {_BACKGROUND_LABEL} and {_HYPOTHESIS_LABEL}, and keep "
                    "the hypothesis out of the background block."
                ),
            ),
        ]
    raise ExtractionRejected(
        f"record {record.id}: no parseable reply after {retries + 1} attempts"
    )


def _parse_labeled_pair(text: str) -> tuple[str, str] | None:
    b_idx = text.find(_BACKGROUND_LABEL)
    h_idx = text.find(_HYPOTHESIS_LABEL)
    if b_idx == -1 or h_idx == -1 or h_idx < b_idx:
        return None
    background = text[b_idx + len(_BACKGROUND_LABEL):h_idx].strip()
    hypothesis = text[h_idx + len(_HYPOTHESIS_LABEL):].strip()
    if not background or not hypothesis:
        return None
    if hypothesis in background:  # background must not restate the hypothesis
        return None
    return background, hypothesis


def summarize_corpus(records: Sequence[LiteratureRecord], endpoint: LlmEndpoint,
                     gateway: LlmGateway | None = None, *, parallelism: int = 1,
                     retries: int = 2) -> tuple[list[BackgroundHypothesisPair], list[dict[str, Any]]]:
    """summarize_to_pair over many records, concurrently up to `parallelism`.

    Returns (pairs in input order, failures as {record_id, reason}).
    """
    gateway = gateway or LlmGateway()
    pairs: dict[int, BackgroundHypothesisPair] = {}
    failures: list[dict[str, Any]] = []

    def work(idx_record: tuple[int, LiteratureRecord]) -> None:
        idx, record = idx_record
        try:
            pairs[idx] = summarize_to_pair(record, endpoint, gateway, retries=retries)
        except WorkbenchError as exc:
            failures.append({"record_id": record.id, "reason": str(exc)})

    if parallelism <= 1:
        for item in enumerate(records):
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(work, enumerate(records)))
    ordered = [pairs[i] for i in sorted(pairs)]
    return ordered, failures


def filter_by_publisher(pairs: Sequence[BackgroundHypothesisPair],
                        records: Sequence[LiteratureRecord],
                        allowlist: Sequence[str]) -> list[BackgroundHypothesisPair]:
    """Keep pairs whose source venue is on the allowlist (case-insensitive exact match)."""
    venues = {r.id: r.venue for r in records}
    allowed = {v.lower() for v in allowlist}
    kept = []
    for pair in pairs:
        venue = venues.get(pair.source_record_id)
        if venue is None:
            raise DanglingSourceReference(
                f"pair {pair.pair_id} references unknown record {pair.source_record_id}"
            )
        if venue.lower() in allowed:
            kept.append(pair)
    return kept


def split_corpus(pairs: Sequence[BackgroundHypothesisPair], config: CorpusConfig) -> CorpusSplit:
    """Partition pairs around the cutoff date.

    Pairs dated on/after the cutoff become unseen_test. Pre-cutoff pairs are
    partitioned by seeded sampling: seen_test_fraction of them (rounded) into
    seen_test, the rest into train. Deterministic for a given (pairs, config);
    sampling is keyed on pair_id so input order does not matter.
    """
    unseen = [p for p in pairs if p.publication_date >= config.cutoff_date]
    pre_cutoff = [p for p in pairs if p.publication_date < config.cutoff_date]

    k = round(config.seen_test_fraction * len(pre_cutoff))
    rng = random.Random(config.rng_seed)
    by_id = sorted(pre_cutoff, key=lambda p: p.pair_id)
    seen_ids = set(p.pair_id for p in rng.sample(by_id, k)) if k else set()

    return CorpusSplit(
        train=[replace(p, split=SPLIT_TRAIN) for p in pre_cutoff if p.pair_id not in seen_ids],
        seen_test=[replace(p, split=SPLIT_SEEN) for p in pre_cutoff if p.pair_id in seen_ids],
        unseen_test=[replace(p, split=SPLIT_UNSEEN) for p in unseen],
    )


DEFAULT_INSTRUCTION = (
    "Propose a scientific hypothesis that follows from the given research background."
)


def export_instruction_pairs(split: Sequence[BackgroundHypothesisPair], path: str | Path,
                             instruction: str = DEFAULT_INSTRUCTION) -> int:
    """Write {instruction, input, output} JSONL for fine-tuning; returns lines written."""
    if not split:
        raise ValueError("refusing to export an empty split")
    try:
        return write_jsonl(
            path,
            (
                {"instruction": instruction, "input": p.background, "output": p.hypothesis}
                for p in split
            ),
        )
    except OSError as exc:
        raise FileUnwritable(str(exc)) from exc


# -- persistence --

def save_records(records: Sequence[LiteratureRecord], path: str | Path) -> int:
    try:
        return write_jsonl(path, (r.as_dict() for r in records))
    except OSError as exc:
        raise FileUnwritable(str(exc)) from exc


def save_pairs(pairs: Sequence[BackgroundHypothesisPair], path: str | Path) -> int:
    try:
        return write_jsonl(path, (p.as_dict() for p in pairs))
    except OSError as exc:
        raise FileUnwritable(str(exc)) from exc


def load_pairs(path: str | Path) -> list[BackgroundHypothesisPair]:
    path = Path(path)
    if not path.is_file():
        raise FileUnreadable(f"cannot read {path}")
    pairs = []
    for line_no, obj in read_jsonl(path):
        try:
            pairs.append(
                BackgroundHypothesisPair(
                    pair_id=str(obj["pair_id"]),
                    background=str(obj["background"]),
                    hypothesis=str(obj["hypothesis"]),
                    source_record_id=str(obj.get("source_record_id", "")),
                    publication_date=parse_publication_date(obj["publication_date"]),
                    split=obj.get("split"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
    return pairs


def load_records(path: str | Path) -> list[LiteratureRecord]:
    path = Path(path)
    if not path.is_file():
        raise FileUnreadable(f"cannot read {path}")
    records = []
    for line_no, obj in read_jsonl(path):
        try:
            records.append(
                LiteratureRecord(
                    id=str(obj["id"]),
                    title=str(obj["title"]),
                    abstract=str(obj["abstract"]),
                    publication_date=parse_publication_date(obj["publication_date"]),
                    venue=str(obj["venue"]),
                    topic_tags=tuple(str(t) for t in obj.get("topic_tags") or ()),
                )
            )
        except (KeyError, ValueError) as exc:
            raise MalformedRecord(line_no, str(exc)) from exc
    return records


def save_rejects(rejects: Iterable[dict[str, Any]], path: str | Path) -> int:
    return write_jsonl(path, rejects)

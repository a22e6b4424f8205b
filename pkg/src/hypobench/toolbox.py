"""PubMed search tooling for the Engineer agent.

Talks to NCBI E-utilities (esearch.fcgi then esummary.fcgi, both retmode=json)
or replays recorded fixture bodies. Every citation is date-filtered
client-side against the query cutoff, so the contamination guarantee never
depends on upstream query semantics. Partial publication dates resolve to
their latest possible day; undatable results are dropped outright.
"""

from __future__ import annotations

import calendar
import json
import re
import threading
import time
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from .errors import WorkbenchError
from .gateway import ToolSchema

EUTILS_BASE = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils"
DEFAULT_MAX_RESULTS = 10
SNIPPET_LIMIT = 480
_TITLE_LIMIT = 90


class UpstreamError(WorkbenchError):
    pass


class RateLimited(WorkbenchError):
    """Upstream kept answering 429 through the whole retry budget."""


@dataclass(frozen=True)
class PubMedQuery:
    terms: str
    cutoff_date: date
    max_results: int = DEFAULT_MAX_RESULTS

    def __post_init__(self):
        if not self.terms.strip():
            raise ValueError("query terms must be nonempty")
        if not 1 <= self.max_results <= 50:
            raise ValueError("max_results must be in 1..50")


@dataclass(frozen=True)
class Citation:
    pmid: str
    title: str
    abstract_snippet: str  # empty when the summary body carries no abstract text
    publication_date: date


class Transport(Protocol):
    def esearch(self, params: dict[str, Any]) -> dict[str, Any]: ...
    def esummary(self, params: dict[str, Any]) -> dict[str, Any]: ...


class FixtureTransport:
    """Replays recorded esearch/esummary response bodies; pure and offline."""

    def __init__(self, esearch_body: dict[str, Any], esummary_body: dict[str, Any]):
        self._esearch = esearch_body
        self._esummary = esummary_body
        self.calls: list[tuple[str, dict[str, Any]]] = []

    @classmethod
    def from_dir(cls, path: str | Path) -> "FixtureTransport":
        path = Path(path)
        return cls(
            json.loads((path / "esearch.json").read_text(encoding="utf-8")),
            json.loads((path / "esummary.json").read_text(encoding="utf-8")),
        )

    def esearch(self, params: dict[str, Any]) -> dict[str, Any]:
        self.calls.append(("esearch", dict(params)))
        return self._esearch

    def esummary(self, params: dict[str, Any]) -> dict[str, Any]:
        self.calls.append(("esummary", dict(params)))
        return self._esummary


class SlidingWindowPacer:
    """Gateway-style limiter: at most max_events per window, any alignment."""

    def __init__(self, max_events: int, window: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self._max = max_events
        self._window = window
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._times: list[float] = []

    def wait_turn(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._times = [t for t in self._times if now - t < self._window]
                if len(self._times) < self._max:
                    self._times.append(now)
                    return
                wait = self._times[0] + self._window - now
            self._sleep(max(wait, 0.001))


class EutilsTransport:
    """Live NCBI client. Etiquette: <= 3 requests/second without an API key."""

    def __init__(self, *, base_url: str = EUTILS_BASE, timeout: float = 30.0,
                 max_attempts: int = 3, sleep: Callable[[float], None] = time.sleep,
                 client: httpx.Client | None = None):
        self._base = base_url.rstrip("/")
        self._max_attempts = max_attempts
        self._sleep = sleep
        self._pacer = SlidingWindowPacer(3, 1.0, sleep=sleep)
        self._client = client or httpx.Client(timeout=timeout)

    def esearch(self, params: dict[str, Any]) -> dict[str, Any]:
        return self._get("esearch.fcgi", params)

    def esummary(self, params: dict[str, Any]) -> dict[str, Any]:
        return self._get("esummary.fcgi", params)

    def _get(self, endpoint: str, params: dict[str, Any]) -> dict[str, Any]:
        last: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            self._pacer.wait_turn()
            try:
                response = self._client.get(f"{self._base}/{endpoint}", params=params)
            except httpx.HTTPError as exc:
                last = exc
            else:
                if response.status_code == 200:
                    return response.json()
                last = UpstreamError(f"{endpoint} returned {response.status_code}")
                if response.status_code not in (429,) and response.status_code < 500:
                    raise last
                if response.status_code == 429:
                    last = RateLimited(f"{endpoint} rate limited")
            if attempt < self._max_attempts:
                self._sleep(2 ** (attempt - 1))
        if isinstance(last, WorkbenchError):
            raise last
        raise UpstreamError(f"{endpoint} failed: {last}")


_MONTHS = {name.lower(): i for i, name in enumerate(calendar.month_abbr) if name}
_YEAR_RE = re.compile(r"\b(\d{4})\b")
_DAY_RE = re.compile(r"\b(\d{1,2})\b")


def parse_pubdate_latest(raw: str) -> date | None:
    """Resolve a PubMed pubdate string to its latest possible calendar day.

    "2022 Nov 10" -> 2022-11-10; "2022 Nov" -> 2022-11-30; "2022" -> 2022-12-31;
    month ranges take the later month. Returns None when no year is present,
    so the caller can drop the citation rather than guess.
    """
    year_match = _YEAR_RE.search(raw or "")
    if not year_match:
        return None
    year = int(year_match.group(1))
    rest = raw[year_match.end():]
    months = [_MONTHS[token[:3].lower()] for token in re.findall(r"[A-Za-z]+", rest)
              if token[:3].lower() in _MONTHS]
    if not months:
        return date(year, 12, 31)
    month = max(months)
    day_match = _DAY_RE.search(rest)
    last_day = calendar.monthrange(year, month)[1]
    if day_match:
        day = min(int(day_match.group(1)), last_day)
        if day >= 1:
            return date(year, month, day)
    return date(year, month, last_day)


class PubMedClient:
    """Search client with cutoff filtering and an internally synchronized cache."""

    def __init__(self, transport: Transport | None = None):
        self._transport = transport or EutilsTransport()
        self._cache: dict[tuple[str, int, str], tuple[Citation, ...]] = {}
        self._cache_lock = threading.Lock()

    def search(self, query: PubMedQuery) -> list[Citation]:
        """At most max_results citations, all strictly before the query cutoff."""
        key = (query.terms, query.max_results, query.cutoff_date.isoformat())
        with self._cache_lock:
            cached = self._cache.get(key)
        if cached is not None:
            return list(cached)

        search_body = self._transport.esearch({
            "db": "pubmed",
            "term": query.terms,
            "retmax": query.max_results,
            "retmode": "json",
        })
        id_list = [str(i) for i in search_body.get("esearchresult", {}).get("idlist", [])]
        id_list = id_list[: query.max_results]
        citations: list[Citation] = []
        if id_list:
            summary_body = self._transport.esummary({
                "db": "pubmed",
                "id": ",".join(id_list),
                "retmode": "json",
            })
            items = summary_body.get("result", {})
            for pmid in id_list:  # upstream esearch order, not esummary order
                item = items.get(pmid)
                if not isinstance(item, dict):
                    continue
                published = parse_pubdate_latest(str(item.get("pubdate", "")))
                if published is None or published >= query.cutoff_date:
                    continue
                citations.append(Citation(
                    pmid=pmid,
                    title=str(item.get("title", "")).strip(),
                    abstract_snippet=str(item.get("abstract", "")).strip(),
                    publication_date=published,
                ))

        frozen = tuple(citations)
        with self._cache_lock:
            self._cache[key] = frozen
        return list(frozen)


def format_observation(citations: list[Citation]) -> str:
    """Numbered digest for the agent transcript; empty input renders NO RESULTS."""
    if not citations:
        return "NO RESULTS"
    blocks = []
    for i, c in enumerate(citations, start=1):
        title = c.title[:_TITLE_LIMIT]
        snippet = c.abstract_snippet[:SNIPPET_LIMIT]
        block = f"[{i}] PMID:{c.pmid} | {c.publication_date.isoformat()} | {title}"
        if snippet:
            block += f"\n    {snippet}"
        blocks.append(block)
    return "\n".join(blocks)


def engineer_tool_schemas() -> list[ToolSchema]:
    """The single declared tool for the native tool-call protocol."""
    return [
        ToolSchema(
            name="search_pubmed",
            description=(
                "Search PubMed for biomedical literature. Returns a numbered digest of "
                "citations (PMID, date, title, snippet) published before the session cutoff."
            ),
            parameters={
                "type": "object",
                "properties": {
                    "terms": {"type": "string", "description": "Search terms or boolean query."},
                    "max_results": {
                        "type": "integer",
                        "description": f"Maximum citations to return (default {DEFAULT_MAX_RESULTS}, cap 50).",
                    },
                },
                "required": ["terms"],
            },
        )
    ]


def make_search_tool(client: PubMedClient, cutoff_date: date,
                     default_max_results: int = DEFAULT_MAX_RESULTS) -> Callable[[str, dict], str]:
    """Bind a PubMed client and cutoff into the (name, args) -> observation executor."""

    def execute(name: str, args: dict[str, Any]) -> str:
        if name != "search_pubmed":
            raise KeyError(name)
        terms = str(args.get("terms", "")).strip()
        if not terms:
            return "NO RESULTS"
        raw_max = args.get("max_results", default_max_results)
        try:
            max_results = max(1, min(int(raw_max), 50))
        except (TypeError, ValueError):
            max_results = default_max_results
        citations = client.search(PubMedQuery(terms=terms, cutoff_date=cutoff_date,
                                              max_results=max_results))
        return format_observation(citations)

    return execute

"""Rubric-based hypothesis judging through an LLM endpoint.

The judge scores four facets (novelty, relevance, significance,
verifiability) on a 0-3 integer scale with a mandatory explanation. Requests
always run at temperature 0.0 so repeated judgments are stable. Parsing is
tolerant of surrounding prose but strict about values: a missing facet or an
out-of-range score raises a typed error, never a silent default.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import WorkbenchError
from .gateway import ChatMessage, LlmEndpoint, LlmGateway, LlmRequestParams, with_temperature

FACETS = ("novelty", "relevance", "significance", "verifiability")


class JudgeParseError(WorkbenchError):
    pass


class MissingFacet(JudgeParseError):
    def __init__(self, name: str):
        super().__init__(f"reply is missing a {name} line")
        self.name = name


class OutOfRange(JudgeParseError):
    def __init__(self, name: str, value):
        super().__init__(f"{name} score {value!r} outside 0..3")
        self.name = name
        self.value = value


class JudgeFormatFailure(WorkbenchError):
    """Both the original reply and the reprompted reply were unparseable."""

    def __init__(self, raw_replies: list[str]):
        super().__init__("judge replies unparseable after reprompt")
        self.raw_replies = raw_replies


@dataclass(frozen=True)
class FacetScores:
    novelty: int
    relevance: int
    significance: int
    verifiability: int
    explanation: str

    def __post_init__(self):
        for facet in FACETS:
            value = getattr(self, facet)
            if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 3:
                raise OutOfRange(facet, value)
        if not self.explanation.strip():
            raise ValueError("explanation must be nonempty")

    def as_dict(self) -> dict:
        return {
            "novelty": self.novelty,
            "relevance": self.relevance,
            "significance": self.significance,
            "verifiability": self.verifiability,
            "explanation": self.explanation,
        }


@dataclass(frozen=True)
class JudgeEvaluation:
    scores: FacetScores
    attempts: int
    raw_reply: str


def _load_template(name: str, template_dir: str | Path | None = None) -> str:
    if template_dir is not None:
        candidate = Path(template_dir) / f"{name}.txt"
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    return resources.files("hypobench.templates").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def build_judge_prompt(background: str, hypothesis: str,
                       template_dir: str | Path | None = None) -> list[ChatMessage]:
    if not background.strip() or not hypothesis.strip():
        raise ValueError("background and hypothesis must be nonempty")
    system = _load_template("judge_system", template_dir).strip()
    user = _load_template("judge_user", template_dir).format(
        background=background, hypothesis=hypothesis
    ).strip()
    return [ChatMessage(role="system", content=system), ChatMessage(role="user", content=user)]


_SCORE_RE = {
    facet: re.compile(rf"(?im)^\s*[-*]?\s*{facet}\s*[:=]\s*(?P<value>[+-]?\d+(?:\.\d+)?)\s*(?:/\s*3)?\s*$")
    for facet in FACETS
}
_EXPLANATION_RE = re.compile(r"(?is)^\s*[-*]?\s*explanation\s*[:=]\s*(?P<rest>.*)$", re.MULTILINE)


def parse_judge_output(text: str) -> FacetScores:
    """Extract the four labeled integer scores and the explanation.

    Tolerant of prose around the answer block; rejects non-integer or
    out-of-range scores with typed errors.
    """
    values: dict[str, int] = {}
    for facet in FACETS:
        match = _SCORE_RE[facet].search(text or "")
        if not match:
            raise MissingFacet(facet)
        raw = match.group("value")
        number = float(raw)
        if not number.is_integer():
            raise OutOfRange(facet, raw)
        value = int(number)
        if not 0 <= value <= 3:
            raise OutOfRange(facet, value)
        values[facet] = value
    explanation_match = _EXPLANATION_RE.search(text or "")
    if not explanation_match or not explanation_match.group("rest").strip():
        raise MissingFacet("explanation")
    return FacetScores(explanation=explanation_match.group("rest").strip(), **values)


def render_answer_block(scores: FacetScores) -> str:
    """The rigid labeled-lines format the judge is asked to emit."""
    return (
        f"Novelty: {scores.novelty}\n"
        f"Relevance: {scores.relevance}\n"
        f"Significance: {scores.significance}\n"
        f"Verifiability: {scores.verifiability}\n"
        f"Explanation: {scores.explanation}"
    )


_FORMAT_REMINDER = (
    "Your previous reply could not be parsed. Repeat your assessment, ending with "
    "exactly the required answer block: four lines 'Novelty/Relevance/Significance/"
    "Verifiability: <integer 0-3>' followed by 'Explanation: <text>'."
)


def evaluate_hypothesis(background: str, hypothesis: str, judge_endpoint: LlmEndpoint,
                        params: LlmRequestParams | None = None,
                        gateway: LlmGateway | None = None,
                        template_dir: str | Path | None = None) -> JudgeEvaluation:
    """Build -> complete -> parse, with one format-reminder reprompt on parse failure."""
    gateway = gateway or LlmGateway()
    params = with_temperature(params or LlmRequestParams(), 0.0)  # judging is always greedy
    messages = build_judge_prompt(background, hypothesis, template_dir)

    raw_replies: list[str] = []
    for attempt in (1, 2):
        reply = gateway.complete(judge_endpoint, messages, params)
        raw_replies.append(reply.text)
        try:
            scores = parse_judge_output(reply.text)
        except JudgeParseError:
            messages = messages + [
                ChatMessage(role="assistant", content=reply.text or "(empty)"),
                ChatMessage(role="user", content=_FORMAT_REMINDER),
            ]
            continue
        return JudgeEvaluation(scores=scores, attempts=attempt, raw_reply=reply.text)
    raise JudgeFormatFailure(raw_replies)

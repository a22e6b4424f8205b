"""Generation prompt construction and in-context example selection.

Few-shot exemplars come either from seeded uniform sampling or from lexical
tf-idf cosine retrieval over training backgrounds. Both selectors refuse to
draw from test splits, and retrieval can exclude the query's own pair, so
evaluation items never leak into prompts.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import SPLIT_SEEN, SPLIT_UNSEEN, BackgroundHypothesisPair
from .errors import WorkbenchError
from .gateway import ChatMessage
from .metrics import tokenize

MODE_ZERO_SHOT = "zero_shot"
MODE_FEW_SHOT_RANDOM = "few_shot_random"
MODE_FEW_SHOT_RETRIEVAL = "few_shot_retrieval"
MODES = (MODE_ZERO_SHOT, MODE_FEW_SHOT_RANDOM, MODE_FEW_SHOT_RETRIEVAL)

_TEST_SPLITS = (SPLIT_SEEN, SPLIT_UNSEEN)


class NotEnoughExamples(WorkbenchError):
    pass


class ShotCountMismatch(WorkbenchError):
    pass


class ContaminatedPool(WorkbenchError):
    """A test-split pair was offered as a few-shot candidate."""


@dataclass(frozen=True)
class PromptSpec:
    mode: str
    instruction: str
    k: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != MODE_ZERO_SHOT and not 1 <= self.k <= 16:
            raise ValueError("k must be in 1..16 for few-shot modes")


@dataclass(frozen=True)
class ShotSelection:
    pair_ids: tuple[str, ...]
    scores: tuple[float, ...] | None = None


def _guard_pool(pairs: Sequence[BackgroundHypothesisPair]) -> list[BackgroundHypothesisPair]:
    for pair in pairs:
        if pair.split in _TEST_SPLITS:
            raise ContaminatedPool(
                f"pair {pair.pair_id} belongs to split {pair.split}; shots must come from train"
            )
    return list(pairs)


def select_shots_random(train: Sequence[BackgroundHypothesisPair], k: int, seed: int) -> ShotSelection:
    """k distinct pairs, uniform without replacement, deterministic under seed."""
    pool = _guard_pool(train)
    if len(pool) < k:
        raise NotEnoughExamples(f"need {k} examples, pool has {len(pool)}")
    chosen = random.Random(seed).sample(pool, k)
    return ShotSelection(pair_ids=tuple(p.pair_id for p in chosen))


class TfidfIndex:
    """Immutable lexical index over pair backgrounds.

    idf = ln((1 + N) / (1 + df)) + 1 over whole-background documents; vectors
    are raw term counts scaled by idf, then L2-normalized. Built once, safe
    for concurrent queries.
    """

    def __init__(self, train: Sequence[BackgroundHypothesisPair]):
        pool = _guard_pool(train)
        if not pool:
            raise ValueError("cannot index an empty training set")
        self._pairs = {p.pair_id: p for p in pool}
        doc_terms = {p.pair_id: Counter(tokenize(p.background)) for p in pool}
        n_docs = len(pool)
        df: Counter = Counter()
        for counts in doc_terms.values():
            df.update(counts.keys())
        self.idf = {term: math.log((1 + n_docs) / (1 + term_df)) + 1.0 for term, term_df in df.items()}
        self._vectors = {
            pair_id: self._normalize({t: c * self.idf[t] for t, c in counts.items()})
            for pair_id, counts in doc_terms.items()
        }

    @staticmethod
    def _normalize(vector: dict[str, float]) -> dict[str, float]:
        norm = math.sqrt(sum(v * v for v in vector.values()))
        if norm == 0.0:
            return {}
        return {t: v / norm for t, v in vector.items()}

    def __len__(self) -> int:
        return len(self._pairs)

    def pair(self, pair_id: str) -> BackgroundHypothesisPair:
        return self._pairs[pair_id]

    def vector(self, pair_id: str) -> dict[str, float]:
        return dict(self._vectors[pair_id])

    def query_vector(self, text: str) -> dict[str, float]:
        counts = Counter(tokenize(text))
        weighted = {t: c * self.idf[t] for t, c in counts.items() if t in self.idf}
        return self._normalize(weighted)

    def similarities(self, text: str) -> dict[str, float]:
        query = self.query_vector(text)
        out = {}
        for pair_id, vector in self._vectors.items():
            out[pair_id] = sum(weight * vector.get(term, 0.0) for term, weight in query.items())
        return out


def tfidf_index(train: Sequence[BackgroundHypothesisPair]) -> TfidfIndex:
    return TfidfIndex(train)


def select_shots_similar(index: TfidfIndex, background: str, k: int,
                         exclude_pair_id: str | None = None) -> ShotSelection:
    """Top-k by cosine similarity; equal scores break ties by ascending pair_id."""
    available = len(index) - (1 if exclude_pair_id and exclude_pair_id in index._pairs else 0)
    if available < k:
        raise NotEnoughExamples(f"need {k} examples, index offers {available}")
    scores = index.similarities(background)
    if exclude_pair_id is not None:
        scores.pop(exclude_pair_id, None)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    return ShotSelection(
        pair_ids=tuple(pair_id for pair_id, _ in ranked),
        scores=tuple(score for _, score in ranked),
    )


class PromptTemplates:
    """Plain-text templates with named placeholders; overridable per directory."""

    FILES = ("generation_system", "generation_user", "shot_user", "shot_assistant")

    def __init__(self, template_dir: str | Path | None = None):
        self._dir = Path(template_dir) if template_dir else None

    def load(self, name: str) -> str:
        if self._dir is not None:
            candidate = self._dir / f"{name}.txt"
            if candidate.is_file():
                return candidate.read_text(encoding="utf-8")
        return resources.files("hypobench.templates").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def default_instruction() -> str:
    return (
        resources.files("hypobench.templates")
        .joinpath("default_instruction.txt")
        .read_text(encoding="utf-8")
        .strip()
    )


def build_generation_prompt(spec: PromptSpec, background: str,
                            shots: Sequence[BackgroundHypothesisPair] | None = None,
                            templates: PromptTemplates | None = None) -> list[ChatMessage]:
    """System + alternating shot exemplars + the target background as final user turn."""
    templates = templates or PromptTemplates()
    if spec.mode == MODE_ZERO_SHOT:
        shots = []
    else:
        if shots is None or len(shots) != spec.k:
            raise ShotCountMismatch(
                f"mode {spec.mode} needs exactly {spec.k} shots, got {0 if shots is None else len(shots)}"
            )
        _guard_pool(shots)

    system_text = templates.load("generation_system").format(instruction=spec.instruction).strip()
    messages = [ChatMessage(role="system", content=system_text)]
    shot_user = templates.load("shot_user")
    shot_assistant = templates.load("shot_assistant")
    for shot in shots:
        messages.append(
            ChatMessage(role="user", content=shot_user.format(shot_background=shot.background).strip())
        )
        messages.append(
            ChatMessage(
                role="assistant",
                content=shot_assistant.format(shot_hypothesis=shot.hypothesis).strip(),
            )
        )
    user_text = templates.load("generation_user").format(background=background).strip()
    messages.append(ChatMessage(role="user", content=user_text))
    return messages


HYPOTHESIS_MARKER = "HYPOTHESIS:"


def extract_hypothesis(reply: str) -> str:
    """Pull the hypothesis out of a generation reply; fall back to the raw text."""
    idx = reply.find(HYPOTHESIS_MARKER)
    if idx == -1:
        return reply.strip()
    return reply[idx + len(HYPOTHESIS_MARKER):].strip() or reply.strip()

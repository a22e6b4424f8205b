"""Shared builders for harness/CLI/service/acceptance tests."""

from __future__ import annotations

import itertools
from datetime import date
from pathlib import Path

from hypobench.corpus import BackgroundHypothesisPair, save_pairs
from hypobench.gateway import LlmResponse, make_mock_endpoint
from hypobench.judge import FacetScores, render_answer_block

TOPICS = [
    "amyloid plaques in cortical tissue",
    "tau tangles along connected regions",
    "microglial clearance of plaques",
    "gut microbiome and immune tone",
    "sleep spindles and memory transfer",
    "ferroptosis in mutant tumors",
    "cortisol exposure in hippocampus",
    "synaptic pruning by complement",
    "mitochondrial dysfunction in neurons",
    "checkpoint blockade response variance",
    "spindle density and consolidation",
    "vascular amyloid and perfusion",
    "lipid peroxidation vulnerability",
    "interferon signatures in glia",
]


def fixture_pair(pair_id: str, topic: str, day: date, split: str) -> BackgroundHypothesisPair:
    return BackgroundHypothesisPair(
        pair_id=pair_id,
        background=f"Background on {topic}; prior work links it to measurable outcomes.",
        hypothesis=f"Gold claim: {topic} causally drives the observed outcome.",
        source_record_id=f"rec-{pair_id}",
        publication_date=day,
        split=split,
    )


def build_fixture_corpus(n_train: int = 8, n_seen: int = 6, n_unseen: int = 6
                         ) -> list[BackgroundHypothesisPair]:
    """Deterministic corpus: train/seen pre-cutoff, unseen post-cutoff."""
    topics = itertools.cycle(TOPICS)
    pairs = []
    for i in range(n_train):
        pairs.append(fixture_pair(f"train-{i:02d}", next(topics), date(2022, 1 + i % 12, 5), "train"))
    for i in range(n_seen):
        pairs.append(fixture_pair(f"seen-{i:02d}", next(topics), date(2022, 1 + i % 12, 9), "seen_test"))
    for i in range(n_unseen):
        pairs.append(fixture_pair(f"unseen-{i:02d}", next(topics), date(2023, 1 + i % 12, 9), "unseen_test"))
    return pairs


def write_fixture_corpus(path: Path, **kwargs) -> list[BackgroundHypothesisPair]:
    pairs = build_fixture_corpus(**kwargs)
    save_pairs(pairs, path)
    return pairs


def generation_reply(i: int) -> LlmResponse:
    return LlmResponse(text=f"HYPOTHESIS: generated claim number {i} about pathway {i % 5}.")


def judge_reply(i: int) -> LlmResponse:
    scores = FacetScoresCycle(i)
    return LlmResponse(text=render_answer_block(scores))


def FacetScoresCycle(i: int) -> FacetScores:
    return FacetScores(
        novelty=i % 4,
        relevance=(i + 1) % 4,
        significance=(i + 2) % 4,
        verifiability=(i + 3) % 4,
        explanation=f"Deterministic rationale {i}.",
    )


def generation_endpoint_for(cells: int, **kwargs):
    return make_mock_endpoint([generation_reply(i) for i in range(cells)], name="gen-mock", **kwargs)


def judge_endpoint_for(cells: int, **kwargs):
    return make_mock_endpoint([judge_reply(i) for i in range(cells)],
                              name="judge-mock", model_id="judge-model", **kwargs)


class CountingClock:
    """Deterministic clock: each call returns start, start+1, start+2, ..."""

    def __init__(self, start: float = 0.0):
        self.value = start - 1.0

    def __call__(self) -> float:
        self.value += 1.0
        return self.value

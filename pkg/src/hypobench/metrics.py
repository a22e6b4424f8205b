"""Native text-overlap and correlation metrics.

Self-contained implementations of sentence BLEU with additive smoothing,
ROUGE-1/2/L, SelfBLEU over a pool of generations, and Pearson/Spearman
correlation. Every function here is pure and safe for concurrent use.

The tokenizer defined here is the single tokenization rule for the whole
workbench; other modules must not roll their own.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import WorkbenchError

# Added to each n-gram match count so a zero-match order never zeroes the
# geometric mean. Orders where the candidate has no n-grams at all score the
# bare epsilon, so identical sequences shorter than max_n do not reach 1.0.
BLEU_EPSILON = 1e-9

# Hyphen stays inside tokens ("alpha-synuclein"); every other ASCII
# punctuation character becomes a standalone token.
_SPLIT_PUNCT = frozenset(string.punctuation) - {"-"}


class NoReferences(WorkbenchError):
    """BLEU needs at least one nonempty reference."""


class TooFewHypotheses(WorkbenchError):
    """SelfBLEU needs at least two hypotheses."""


class LengthMismatch(WorkbenchError):
    """Correlation inputs must be equal-length vectors of size >= 2."""


class ZeroVariance(WorkbenchError):
    """Correlation is undefined when either vector is constant."""


TokenSequence = Sequence[str]


@dataclass(frozen=True)
class OverlapScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricReport:
    """The overlap scores reported for one generation against its gold text."""

    bleu: float
    rouge1_f: float
    rouge2_f: float
    rougeL_f: float

    def as_dict(self) -> dict[str, float]:
        return {
            "bleu": self.bleu,
            "rouge1_f": self.rouge1_f,
            "rouge2_f": self.rouge2_f,
            "rougeL_f": self.rougeL_f,
        }


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, then split punctuation into standalone tokens."""
    tokens: list[str] = []
    for chunk in text.lower().split():
        word: list[str] = []
        for ch in chunk:
            if ch in _SPLIT_PUNCT:
                if word:
                    tokens.append("".join(word))
                    word = []
                tokens.append(ch)
            else:
                word.append(ch)
        if word:
            tokens.append("".join(word))
    return tokens


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_reference_length(references: list[list[str]], candidate_length: int) -> int:
    best = len(references[0])
    for ref in references[1:]:
        length = len(ref)
        delta, best_delta = abs(length - candidate_length), abs(best - candidate_length)
        if delta < best_delta or (delta == best_delta and length < best):
            best = length
    return best


def bleu(candidate: TokenSequence, references: Sequence[TokenSequence], max_n: int = 4) -> float:
    """Sentence BLEU: smoothed modified n-gram precisions under a brevity penalty.

    For each order n in 1..max_n the precision is
    (clipped matches + epsilon) / max(candidate n-gram count, 1); the score is
    the geometric mean of those, times min(1, exp(1 - r/c)) with r the closest
    reference length, clamped into [0, 1].
    """
    refs = [list(r) for r in references]
    if not refs or all(len(r) == 0 for r in refs):
        raise NoReferences("bleu requires at least one nonempty reference")
    cand = list(candidate)
    if not cand:
        return 0.0

    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(cand, n)
        total = sum(cand_counts.values())
        clipped = 0
        if cand_counts:
            max_ref_counts: Counter = Counter()
            for ref in refs:
                for gram, count in _ngram_counts(ref, n).items():
                    if count > max_ref_counts[gram]:
                        max_ref_counts[gram] = count
            clipped = sum(min(count, max_ref_counts[gram]) for gram, count in cand_counts.items())
        log_sum += math.log((clipped + BLEU_EPSILON) / max(total, 1))

    geometric_mean = math.exp(log_sum / max_n)
    r = _closest_reference_length(refs, len(cand))
    brevity_penalty = min(1.0, math.exp(1.0 - r / len(cand)))
    return min(1.0, brevity_penalty * geometric_mean)


def rouge_n(candidate: TokenSequence, reference: TokenSequence, n: int) -> OverlapScore:
    """Clipped n-gram multiset overlap; sequences shorter than n score all zeros."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand_counts = _ngram_counts(list(candidate), n)
    ref_counts = _ngram_counts(list(reference), n)
    overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    cand_total = sum(cand_counts.values())
    ref_total = sum(ref_counts.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return OverlapScore(precision, recall, _f1(precision, recall))


def rouge_l(candidate: TokenSequence, reference: TokenSequence) -> OverlapScore:
    """LCS-based overlap: precision L/|candidate|, recall L/|reference|."""
    cand, ref = list(candidate), list(reference)
    length = _lcs_length(cand, ref)
    precision = length / len(cand) if cand else 0.0
    recall = length / len(ref) if ref else 0.0
    return OverlapScore(precision, recall, _f1(precision, recall))


def self_bleu(hypotheses: Sequence[TokenSequence], max_n: int = 4) -> float:
    """Mean BLEU of each hypothesis against all the others.

    Lower scores signify greater uncertainty and diversity in the pool.
    """
    hyps = [list(h) for h in hypotheses]
    if len(hyps) < 2:
        raise TooFewHypotheses("self_bleu requires at least two hypotheses")
    total = 0.0
    for i, hyp in enumerate(hyps):
        others = hyps[:i] + hyps[i + 1 :]
        total += bleu(hyp, others, max_n=max_n)
    return total / len(hyps)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient, clamped into [-1, 1]."""
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys) or len(xs) < 2:
        raise LengthMismatch(f"got lengths {len(xs)} and {len(ys)}; need equal and >= 2")
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [v - mean_x for v in xs]
    dy = [v - mean_y for v in ys]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    covariance = sum(a * b for a, b in zip(dx, dy))
    return max(-1.0, min(1.0, covariance / math.sqrt(var_x * var_y)))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson over fractional ranks; ties receive the mean of their rank span."""
    if len(x) != len(y) or len(x) < 2:
        raise LengthMismatch(f"got lengths {len(x)} and {len(y)}; need equal and >= 2")
    return pearson(fractional_ranks(x), fractional_ranks(y))


def fractional_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; runs of equal values all get the average rank of the run."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        average = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = average
        i = j + 1
    return ranks


def compute_report(candidate_text: str, reference_text: str) -> MetricReport:
    """Tokenize both texts with the shared tokenizer and score the standard trio."""
    cand = tokenize(candidate_text)
    ref = tokenize(reference_text)
    return MetricReport(
        bleu=bleu(cand, [ref]),
        rouge1_f=rouge_n(cand, ref, 1).f1,
        rouge2_f=rouge_n(cand, ref, 2).f1,
        rougeL_f=rouge_l(cand, ref).f1,
    )


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            if token == other:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]

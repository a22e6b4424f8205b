"""Independent brute-force score implementations used to cross-check the library.

Nothing here imports from hypobench. Everything is computed by direct
enumeration over lists: no Counter, no shared n-gram helpers, recursive LCS,
stdlib correlation. Slow on purpose; only run on tiny inputs.

Shared definitional constants (they are part of the metric definitions, not
of any implementation): epsilon smoothing 1e-9 added to n-gram match counts,
final score clamped into [0, 1], brevity penalty from the closest reference
length with ties going to the shorter reference.
"""

from __future__ import annotations

import math
import statistics
from functools import lru_cache

EPSILON = 1e-9


def ngram_list(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(0, len(tokens) - n + 1)]


def count_occurrences(grams: list[tuple[str, ...]], gram: tuple[str, ...]) -> int:
    total = 0
    for g in grams:
        if g == gram:
            total += 1
    return total


def bleu_brute(candidate: list[str], references: list[list[str]], max_n: int = 4) -> float:
    if not any(references):
        raise ValueError("need at least one nonempty reference")
    if not candidate:
        return 0.0
    product = 1.0
    for n in range(1, max_n + 1):
        cand_grams = ngram_list(candidate, n)
        distinct: list[tuple[str, ...]] = []
        for g in cand_grams:
            if g not in distinct:
                distinct.append(g)
        clipped = 0
        for g in distinct:
            in_candidate = count_occurrences(cand_grams, g)
            best_in_refs = 0
            for ref in references:
                occurrences = count_occurrences(ngram_list(ref, n), g)
                if occurrences > best_in_refs:
                    best_in_refs = occurrences
            clipped += min(in_candidate, best_in_refs)
        denominator = len(cand_grams) if cand_grams else 1
        product *= (clipped + EPSILON) / denominator
    geometric_mean = product ** (1.0 / max_n)

    c = len(candidate)
    r = len(references[0])
    for ref in references[1:]:
        if abs(len(ref) - c) < abs(r - c) or (abs(len(ref) - c) == abs(r - c) and len(ref) < r):
            r = len(ref)
    brevity = min(1.0, math.exp(1.0 - r / c))
    return min(1.0, brevity * geometric_mean)


def rouge_n_brute(candidate: list[str], reference: list[str], n: int) -> tuple[float, float, float]:
    cand_grams = ngram_list(candidate, n)
    ref_grams = ngram_list(reference, n)
    distinct: list[tuple[str, ...]] = []
    for g in cand_grams:
        if g not in distinct:
            distinct.append(g)
    overlap = 0
    for g in distinct:
        overlap += min(count_occurrences(cand_grams, g), count_occurrences(ref_grams, g))
    precision = overlap / len(cand_grams) if cand_grams else 0.0
    recall = overlap / len(ref_grams) if ref_grams else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def lcs_brute(a: list[str], b: list[str]) -> int:
    ta, tb = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == len(ta) or j == len(tb):
            return 0
        if ta[i] == tb[j]:
            return 1 + rec(i + 1, j + 1)
        return max(rec(i + 1, j), rec(i, j + 1))

    return rec(0, 0)


def rouge_l_brute(candidate: list[str], reference: list[str]) -> tuple[float, float, float]:
    length = lcs_brute(candidate, reference)
    precision = length / len(candidate) if candidate else 0.0
    recall = length / len(reference) if reference else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def self_bleu_brute(hypotheses: list[list[str]], max_n: int = 4) -> float:
    if len(hypotheses) < 2:
        raise ValueError("need at least two hypotheses")
    total = 0.0
    for i, hyp in enumerate(hypotheses):
        others = [h for j, h in enumerate(hypotheses) if j != i]
        total += bleu_brute(hyp, others, max_n=max_n)
    return total / len(hypotheses)


def pearson_brute(x: list[float], y: list[float]) -> float:
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need equal-length vectors of size >= 2")
    return statistics.correlation([float(v) for v in x], [float(v) for v in y])


def ranks_brute(values: list[float]) -> list[float]:
    # Rank by counting, never by sorting: 1 + (#smaller) + (#equal - 1) / 2.
    out = []
    for v in values:
        smaller = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        out.append(1.0 + smaller + (equal - 1) / 2.0)
    return out


def spearman_brute(x: list[float], y: list[float]) -> float:
    return pearson_brute(ranks_brute(list(x)), ranks_brute(list(y)))

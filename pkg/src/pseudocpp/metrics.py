"""Code-similarity metrics: BLEU, n-gram and keyword-weighted n-gram match,
AST subtree match, def-use dataflow match, the combined CodeBLEU score, and a
token-LCS similarity score, plus corpus-level reporting.

All scores are reference-directed fractions in [0, 1]. Token-level metrics run
over the C++ lexer's token texts, so whitespace and comments never count.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .cppast import CPP_KEYWORDS, enumerate_subtrees, extract_dataflow, lex_cpp, parse_cpp_subset

MAX_NGRAM_ORDER = 4


class LengthMismatchError(ValueError):
    """Candidate and reference lists differ in length."""


@dataclass(frozen=True)
class MetricWeights:
    """Component weights for the combined score plus n-gram knobs."""

    bleu: float = 0.25
    weighted_ngram: float = 0.25
    syntax: float = 0.25
    dataflow: float = 0.25
    ngram_order_weights: tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)
    keyword_boost: float = 5.0

    def __post_init__(self) -> None:
        total = self.bleu + self.weighted_ngram + self.syntax + self.dataflow
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights must sum to 1, got {total}")
        if abs(sum(self.ngram_order_weights) - 1.0) > 1e-9:
            raise ValueError("n-gram order weights must sum to 1")
        if self.keyword_boost < 1.0:
            raise ValueError("keyword boost must be >= 1")


def code_tokens(code: str) -> list[str]:
    return [tok.text for tok in lex_cpp(code)]


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def ngram_precision(candidate: list[str], reference: list[str], n: int) -> float:
    """Clipped n-gram precision: matched candidate n-grams (capped at the
    reference count) over total candidate n-grams; 0 with no candidate
    n-grams."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = _ngram_counts(candidate, n)
    total = sum(cand.values())
    if total == 0:
        return 0.0
    ref = _ngram_counts(reference, n)
    matched = sum(min(count, ref[gram]) for gram, count in cand.items())
    return matched / total


def bleu(candidate: list[str], reference: list[str]) -> float:
    """Sentence BLEU: brevity penalty times the geometric mean of clipped
    precisions for orders 1-4.

    Orders the candidate is too short to populate count as vacuously perfect,
    so identical short programs still score 1; any populated order with zero
    matches (or an empty candidate) yields 0.
    """
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, MAX_NGRAM_ORDER + 1):
        if len(candidate) - n + 1 <= 0:
            continue
        p = ngram_precision(candidate, reference, n)
        if p == 0.0:
            return 0.0
        log_sum += math.log(p)
    brevity = min(1.0, math.exp(1.0 - len(reference) / len(candidate)))
    return brevity * math.exp(log_sum / MAX_NGRAM_ORDER)


def _order_ratios(candidate: list[str], reference: list[str], weigh) -> list[tuple[int, float]]:
    """(order, matched/total) for each order the reference populates, with
    per-n-gram weights from ``weigh``."""
    ratios = []
    for n in range(1, MAX_NGRAM_ORDER + 1):
        ref = _ngram_counts(reference, n)
        total = sum(weigh(gram) * count for gram, count in ref.items())
        if total == 0:
            continue
        cand = _ngram_counts(candidate, n)
        matched = sum(weigh(gram) * min(count, cand[gram]) for gram, count in ref.items())
        ratios.append((n, matched / total))
    return ratios


def ngram_match(candidate: list[str], reference: list[str]) -> float:
    """Mean over populated orders of (matched n-grams / reference n-grams)."""
    ratios = _order_ratios(candidate, reference, lambda gram: 1.0)
    if not ratios:
        return 1.0 if candidate == reference else 0.0
    return sum(r for _, r in ratios) / len(ratios)


def weighted_ngram_match(
    candidate: list[str], reference: list[str], weights: MetricWeights = MetricWeights()
) -> float:
    """Like ngram_match but n-grams containing a C++ keyword count
    ``keyword_boost`` times; order weights renormalize over populated orders."""
    boost = weights.keyword_boost

    def weigh(gram: tuple[str, ...]) -> float:
        return boost if any(tok in CPP_KEYWORDS for tok in gram) else 1.0

    ratios = _order_ratios(candidate, reference, weigh)
    if not ratios:
        return 1.0 if candidate == reference else 0.0
    order_w = {n + 1: w for n, w in enumerate(weights.ngram_order_weights)}
    w_total = sum(order_w[n] for n, _ in ratios)
    return sum(order_w[n] * r for n, r in ratios) / w_total


def syntax_match(candidate_code: str, reference_code: str, min_nodes: int = 2) -> float:
    """Fraction of reference AST subtrees (>= min_nodes nodes) present in the
    candidate AST; 1 when the reference has none. Parsing is total, so this is
    defined for arbitrary input."""
    ref_tree, _ = parse_cpp_subset(lex_cpp(reference_code))
    ref_subtrees = enumerate_subtrees(ref_tree, min_nodes)
    ref_total = sum(ref_subtrees.values())
    if ref_total == 0:
        return 1.0
    cand_tree, _ = parse_cpp_subset(lex_cpp(candidate_code))
    cand_subtrees = enumerate_subtrees(cand_tree, min_nodes)
    matched = sum(min(count, cand_subtrees[fp]) for fp, count in ref_subtrees.items())
    return matched / ref_total


def dataflow_match(candidate_code: str, reference_code: str) -> float | None:
    """Fraction of the reference's normalized def-use edges found in the
    candidate; None (component skipped) when the reference has no edges."""
    ref_tree, _ = parse_cpp_subset(lex_cpp(reference_code))
    ref_graph = extract_dataflow(ref_tree)
    if not ref_graph.match_keys:
        return None
    cand_tree, _ = parse_cpp_subset(lex_cpp(candidate_code))
    cand_graph = extract_dataflow(cand_tree)
    matched = len(ref_graph.match_keys & cand_graph.match_keys)
    return matched / len(ref_graph.match_keys)


def combine_codebleu(
    bleu_score: float,
    weighted_ngram_score: float,
    syntax_score: float,
    dataflow_score: float | None,
    weights: MetricWeights = MetricWeights(),
) -> float:
    """Weighted combination of the four components; when dataflow is absent
    the remaining weights are renormalized to sum to 1."""
    parts = [
        (weights.bleu, bleu_score),
        (weights.weighted_ngram, weighted_ngram_score),
        (weights.syntax, syntax_score),
    ]
    if dataflow_score is not None:
        parts.append((weights.dataflow, dataflow_score))
    weight_total = sum(w for w, _ in parts)
    return sum(w * s for w, s in parts) / weight_total


def similarity_score(candidate: list[str], reference: list[str]) -> float:
    """Token-level LCS ratio: 2*LCS / (len(candidate) + len(reference));
    1 when both are empty."""
    if not candidate and not reference:
        return 1.0
    if not candidate or not reference:
        return 0.0
    previous = [0] * (len(reference) + 1)
    for cand_tok in candidate:
        current = [0]
        for j, ref_tok in enumerate(reference, start=1):
            if cand_tok == ref_tok:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[-1]))
        previous = current
    lcs = previous[-1]
    return 2.0 * lcs / (len(candidate) + len(reference))


@dataclass
class PairScores:
    id: str
    similarity: float
    bleu: float
    ngram: float
    weighted_ngram: float
    syntax: float
    dataflow: float | None
    codebleu: float
    parse_recoveries: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "similarity": self.similarity,
            "bleu": self.bleu,
            "ngram": self.ngram,
            "weighted_ngram": self.weighted_ngram,
            "syntax": self.syntax,
            "dataflow": self.dataflow,
            "codebleu": self.codebleu,
        }


@dataclass
class MetricReport:
    pairs: list[PairScores] = field(default_factory=list)
    means: dict = field(default_factory=dict)
    parse_recoveries: int = 0

    def to_dict(self) -> dict:
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "means": self.means,
            "diagnostics": {"parse_recoveries": self.parse_recoveries},
        }


def score_pair(
    candidate_code: str,
    reference_code: str,
    weights: MetricWeights = MetricWeights(),
    pair_id: str = "",
) -> PairScores:
    cand_tokens = code_tokens(candidate_code)
    ref_tokens = code_tokens(reference_code)
    _, cand_diags = parse_cpp_subset(lex_cpp(candidate_code))
    _, ref_diags = parse_cpp_subset(lex_cpp(reference_code))
    bleu_score = bleu(cand_tokens, ref_tokens)
    weighted = weighted_ngram_match(cand_tokens, ref_tokens, weights)
    syntax = syntax_match(candidate_code, reference_code)
    dataflow = dataflow_match(candidate_code, reference_code)
    return PairScores(
        id=pair_id,
        similarity=similarity_score(cand_tokens, ref_tokens),
        bleu=bleu_score,
        ngram=ngram_match(cand_tokens, ref_tokens),
        weighted_ngram=weighted,
        syntax=syntax,
        dataflow=dataflow,
        codebleu=combine_codebleu(bleu_score, weighted, syntax, dataflow, weights),
        parse_recoveries=len(cand_diags) + len(ref_diags),
    )


def corpus_evaluate(
    candidates: list[str],
    references: list[str],
    weights: MetricWeights = MetricWeights(),
    ids: list[str] | None = None,
) -> MetricReport:
    """Score parallel candidate/reference lists and aggregate arithmetic
    means; the dataflow mean covers only pairs where it is defined."""
    if len(candidates) != len(references):
        raise LengthMismatchError(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    if ids is None:
        ids = [str(i) for i in range(len(candidates))]
    report = MetricReport()
    for pair_id, cand, ref in zip(ids, candidates, references):
        scores = score_pair(cand, ref, weights, pair_id)
        report.pairs.append(scores)
        report.parse_recoveries += scores.parse_recoveries

    def mean(values: list[float]) -> float | None:
        return sum(values) / len(values) if values else None

    pairs = report.pairs
    dataflow_values = [p.dataflow for p in pairs if p.dataflow is not None]
    report.means = {
        "similarity": mean([p.similarity for p in pairs]),
        "bleu": mean([p.bleu for p in pairs]),
        "ngram": mean([p.ngram for p in pairs]),
        "weighted_ngram": mean([p.weighted_ngram for p in pairs]),
        "syntax": mean([p.syntax for p in pairs]),
        "dataflow": mean(dataflow_values),
        "codebleu": mean([p.codebleu for p in pairs]),
    }
    return report

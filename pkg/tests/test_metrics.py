import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudocpp.metrics import (
    LengthMismatchError,
    MetricWeights,
    bleu,
    code_tokens,
    combine_codebleu,
    corpus_evaluate,
    dataflow_match,
    ngram_match,
    ngram_precision,
    score_pair,
    similarity_score,
    syntax_match,
    weighted_ngram_match,
)

VARS_PROGRAM = "int main (){\nint a = 1;\ncin >> a;\ncout << a + 2 << endl;\nreturn 0;\n}"


def test_ngram_precision_identical():
    tokens = "int a = b ;".split()
    for n in range(1, len(tokens) + 1):
        assert ngram_precision(tokens, tokens, n) == 1.0


def test_ngram_precision_clipping():
    assert ngram_precision(["a", "a", "a"], ["a"], 1) == pytest.approx(1 / 3)


def test_ngram_precision_disjoint():
    assert ngram_precision(["a", "b"], ["c", "d"], 1) == 0.0


def test_bleu_identical():
    assert bleu("a b c d e".split(), "a b c d e".split()) == pytest.approx(1.0)


def test_bleu_brevity_penalty():
    assert bleu("a b c d".split(), "a b c d e".split()) == pytest.approx(math.exp(-0.25))


def test_bleu_empty_candidate():
    assert bleu([], ["a"]) == 0.0


def test_bleu_zero_when_populated_order_misses():
    assert bleu("a b c d".split(), "a c b d".split()) == 0.0  # no bigram matches


def _brute_force_bleu(candidate, reference):
    """Independent evaluator: literal product form with list-based counting."""
    if not candidate:
        return 0.0
    product = 1.0
    for n in range(1, 5):
        cand_grams = [tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1)]
        if not cand_grams:
            continue  # vacuous order
        ref_grams = [tuple(reference[i : i + n]) for i in range(len(reference) - n + 1)]
        matched = 0
        for gram in set(cand_grams):
            matched += min(cand_grams.count(gram), ref_grams.count(gram))
        if matched == 0:
            return 0.0
        product *= matched / len(cand_grams)
    brevity = min(1.0, math.exp(1.0 - len(reference) / len(candidate)))
    return brevity * product ** (1.0 / 4.0)


def test_bleu_matches_brute_force_on_random_pairs():
    rng = random.Random(99)
    alphabet = ["int", "a", "b", ";", "=", "+", "(", ")"]
    for _ in range(200):
        cand = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        ref = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        assert bleu(cand, ref) == pytest.approx(_brute_force_bleu(cand, ref), abs=1e-9)


def _hand_ngram_match(candidate, reference):
    ratios = []
    for n in range(1, 5):
        ref_grams = [tuple(reference[i : i + n]) for i in range(len(reference) - n + 1)]
        if not ref_grams:
            continue
        cand_grams = [tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1)]
        matched = sum(
            min(cand_grams.count(g), ref_grams.count(g)) for g in set(ref_grams)
        )
        ratios.append(matched / len(ref_grams))
    if not ratios:
        return 1.0 if candidate == reference else 0.0
    return sum(ratios) / len(ratios)


def test_ngram_match_identical():
    assert ngram_match("int a ;".split(), "int a ;".split()) == 1.0


def test_ngram_match_hand_case():
    cand, ref = "int a ;".split(), "int b ;".split()
    # orders 1..3 populated: 2/3, 0/2, 0/1
    assert _hand_ngram_match(cand, ref) == pytest.approx(2 / 9)
    assert ngram_match(cand, ref) == pytest.approx(2 / 9)


def test_ngram_match_empty_candidate():
    assert ngram_match([], "int a ;".split()) == 0.0


def test_weighted_ngram_match_identical():
    tokens = "int a ;".split()
    assert weighted_ngram_match(tokens, tokens) == 1.0


def test_weighted_ngram_match_hand_case():
    cand, ref = "float a ;".split(), "int a ;".split()
    # n=1: totals int->5, a->1, ;->1 = 7, matched a ; = 2
    # n=2: totals (int a)->5, (a ;)->1 = 6, matched (a ;) = 1
    # n=3: total (int a ;)->5, matched 0
    expected = (2 / 7 + 1 / 6 + 0) / 3
    assert weighted_ngram_match(cand, ref) == pytest.approx(expected)


def test_weighted_boost_one_reduces_to_plain():
    weights = MetricWeights(keyword_boost=1.0)
    cand, ref = "float a ;".split(), "int a ;".split()
    assert weighted_ngram_match(cand, ref, weights) == pytest.approx(ngram_match(cand, ref))


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.sampled_from(["int", "for", "a", "b", ";", "+", "("]), max_size=10),
    st.lists(st.sampled_from(["int", "for", "a", "b", ";", "+", "("]), max_size=10),
)
def test_weighted_equals_plain_at_boost_one(cand, ref):
    weights = MetricWeights(keyword_boost=1.0)
    assert weighted_ngram_match(cand, ref, weights) == pytest.approx(
        ngram_match(cand, ref), abs=1e-12
    )


def test_syntax_match_identical_and_renamed():
    assert syntax_match(VARS_PROGRAM, VARS_PROGRAM) == 1.0
    renamed = VARS_PROGRAM.replace("a", "zz")
    assert syntax_match(renamed, VARS_PROGRAM) == 1.0


def test_syntax_match_empty_candidate():
    assert syntax_match("", VARS_PROGRAM) == 0.0


def test_syntax_match_empty_reference():
    assert syntax_match(VARS_PROGRAM, "") == 1.0


def test_dataflow_match_identical_and_renamed():
    assert dataflow_match(VARS_PROGRAM, VARS_PROGRAM) == 1.0
    renamed = VARS_PROGRAM.replace("a", "zz")
    assert dataflow_match(renamed, VARS_PROGRAM) == 1.0


def test_dataflow_match_absent_reference():
    assert dataflow_match(VARS_PROGRAM, "int main (){ return 0; }") is None


def test_combine_matches_published_components():
    combined = combine_codebleu(0.865, 0.849, 0.8519, 0.8981)
    assert combined == pytest.approx(0.8660, abs=1e-4)
    assert abs(combined - 0.8659) < 0.001


def test_combine_identical_and_zero():
    assert combine_codebleu(1.0, 1.0, 1.0, 1.0) == 1.0
    assert combine_codebleu(0.0, 0.0, 0.0, 0.0) == 0.0


def test_combine_renormalizes_without_dataflow():
    assert combine_codebleu(0.5, 0.7, 0.9, None) == pytest.approx((0.5 + 0.7 + 0.9) / 3)


def test_combine_uniform_is_arithmetic_mean():
    assert combine_codebleu(0.1, 0.2, 0.3, 0.8) == pytest.approx(0.35)


def test_similarity_examples():
    assert similarity_score(["a", "b"], ["a", "b"]) == 1.0
    assert similarity_score(["a", "b"], ["c", "d"]) == 0.0
    assert similarity_score(["a", "b"], ["a", "c"]) == 0.5
    assert similarity_score([], []) == 1.0


def test_metric_weights_validation():
    with pytest.raises(ValueError):
        MetricWeights(bleu=0.5, weighted_ngram=0.5, syntax=0.5, dataflow=0.5)
    with pytest.raises(ValueError):
        MetricWeights(keyword_boost=0.5)


def test_score_pair_identical_program():
    scores = score_pair(VARS_PROGRAM, VARS_PROGRAM)
    assert scores.similarity == scores.bleu == scores.ngram == 1.0
    assert scores.weighted_ngram == scores.syntax == scores.dataflow == scores.codebleu == 1.0


def test_directionality_not_symmetric():
    longer = VARS_PROGRAM
    shorter = "int main (){\nint a = 1;\ncout << a;\n}"
    forward = score_pair(shorter, longer)
    backward = score_pair(longer, shorter)
    assert forward.ngram != backward.ngram


def test_corpus_evaluate_identity_and_schema():
    programs = [VARS_PROGRAM, "int main (){ return 0; }"]
    report = corpus_evaluate(programs, programs)
    assert report.means["codebleu"] == 1.0
    assert report.means["syntax"] == 1.0
    payload = json.loads(json.dumps(report.to_dict()))
    assert set(payload) == {"pairs", "means", "diagnostics"}
    assert set(payload["pairs"][0]) == {
        "id", "similarity", "bleu", "ngram", "weighted_ngram", "syntax", "dataflow", "codebleu",
    }
    assert payload["diagnostics"]["parse_recoveries"] == 0


def test_corpus_evaluate_single_pair_mean_equals_value():
    report = corpus_evaluate([VARS_PROGRAM], [VARS_PROGRAM])
    assert report.means["bleu"] == report.pairs[0].bleu


def test_corpus_evaluate_length_mismatch():
    with pytest.raises(LengthMismatchError):
        corpus_evaluate(["a"], ["a", "b"])


def test_code_tokens_skips_comments_and_whitespace():
    assert code_tokens("int a; // note\n") == ["int", "a", ";"]

import math
import random
import string

import pytest

from citeval.metrics import (
    ScoredResponse,
    UndefinedMetricError,
    aggregate,
    author_match,
    bleu4,
    build_domain_report,
    f1_token,
    hallucination_rate,
    normalize,
    pass_percentage,
    title_exact_match,
    word_mismatch,
)

# Per-domain hallucination-rate values for the strongest endpoint under the
# bare direct protocol, used as the aggregation oracle fixture.
G1_DIRECT_HR = [30.9, 35.9, 27.51, 24.82, 37.48, 29.3, 22.92, 21.01, 36.05, 34.41, 34.71, 53.04]


def scored(exact, wm, bleu=0.5, f1=0.5, kind="title"):
    return ScoredResponse(
        record_key=("k", 0), verdict_kind=kind, ground_truth="t",
        exact_match=exact, word_mismatch_fraction=wm, bleu4=bleu, f1=f1,
        is_pass=False, is_unparseable=kind == "unparseable",
    )


def passed():
    return ScoredResponse(
        record_key=("k", 0), verdict_kind="pass", ground_truth="t",
        exact_match=None, word_mismatch_fraction=None, bleu4=None, f1=None,
        is_pass=True, is_unparseable=False,
    )


def test_normalize_rules():
    assert normalize("Photo-Realistic  Single") == ["photo", "realistic", "single"]
    assert normalize("") == []
    for text in ["A  b,c", "  ", "Hello, World!  again"]:
        tokens = normalize(text)
        assert normalize(" ".join(tokens)) == tokens  # idempotent


def test_word_mismatch_hand_cases():
    assert word_mismatch("same words here", "same words here") == 0.0
    assert word_mismatch("deep learning", "deep networks") == pytest.approx(2 / 3)
    assert word_mismatch("alpha beta", "gamma delta") == 1.0
    assert word_mismatch("", "") == 0.0


def test_word_mismatch_symmetry_and_set_semantics():
    rng = random.Random(3)
    words = ["deep", "wide", "neural", "nets", "learning"]
    for _ in range(50):
        a = " ".join(rng.choices(words, k=rng.randint(1, 6)))
        b = " ".join(rng.choices(words, k=rng.randint(1, 6)))
        assert word_mismatch(a, b) == pytest.approx(word_mismatch(b, a))
        shuffled = a.split()
        rng.shuffle(shuffled)
        duplicated = " ".join(shuffled + shuffled)
        assert word_mismatch(duplicated, b) == pytest.approx(word_mismatch(a, b))


def test_hallucination_rate_values():
    assert hallucination_rate([scored(True, 0.0)] * 4) == 0.0
    # Single response "deep learning" vs "deep networks": 1/2 * (1 + 2/3).
    single = scored(False, word_mismatch("deep learning", "deep networks"))
    assert hallucination_rate([single]) == pytest.approx(0.833333, abs=1e-6)
    assert hallucination_rate([scored(False, 1.0)] * 3) == 1.0


def test_hallucination_rate_guards():
    with pytest.raises(UndefinedMetricError):
        hallucination_rate([])
    with pytest.raises(ValueError):
        hallucination_rate([passed()])


def test_hallucination_rate_permutation_invariant():
    rng = random.Random(5)
    responses = [
        scored(True, 0.0) if rng.random() < 0.3 else scored(False, rng.random())
        for _ in range(20)
    ]
    shuffled = responses[:]
    rng.shuffle(shuffled)
    assert hallucination_rate(responses) == pytest.approx(hallucination_rate(shuffled))


def test_pass_percentage():
    kinds = ["pass"] * 3 + ["title"] * 9
    assert pass_percentage(kinds) == 0.25
    assert pass_percentage(["title"] * 4) == 0.0
    assert pass_percentage(["pass"] * 4) == 1.0
    with pytest.raises(UndefinedMetricError):
        pass_percentage([])


def test_bleu4_identity_and_prefix():
    assert bleu4("photo realistic single image", "photo realistic single image") == pytest.approx(1.0)
    assert bleu4("one", "one") == pytest.approx(1.0)
    prefix = bleu4("a b c", "a b c d")
    assert prefix == pytest.approx(math.exp(1 - 4 / 3))
    assert prefix < 1.0
    assert bleu4("", "anything") == 0.0


def test_bleu4_disjoint_dominated_by_smoothing_floor():
    cand = " ".join(f"alpha{i}" for i in range(40))
    ref = " ".join(f"beta{i}" for i in range(40))
    # Oracle: smoothed precisions are 1/(40-n+2) per order n, brevity 1.
    expected = math.exp(sum(0.25 * math.log(1 / (40 - n + 2)) for n in range(1, 5)))
    value = bleu4(cand, ref)
    assert value == pytest.approx(expected, rel=1e-9)
    assert value < 0.05


def test_f1_token_hand_counts():
    assert f1_token("a b c", "a b c") == 1.0
    assert f1_token("a b c", "a b d") == pytest.approx(2 / 3)
    assert f1_token("x y", "p q") == 0.0
    assert f1_token("", "a") == 0.0


def test_author_match_cases():
    names = ["John Smith", "Maria Garcia", "Wei Zhang"]
    exact, f1 = author_match(list(reversed(names)), names)
    assert exact and f1 == 1.0
    exact, f1 = author_match(["John Smith", "Maria Garcia", "Pat Extra"], names)
    assert not exact and f1 == pytest.approx(2 / 3)
    exact, f1 = author_match([], names)
    assert not exact and f1 == 0.0
    # Punctuation/case-insensitive on whole names.
    exact, _ = author_match(["john smith", "MARIA GARCIA.", "Wei  Zhang"], names)
    assert exact


def test_aggregate_closed_forms():
    mean, std = aggregate([4.0, 4.0, 4.0])
    assert mean == 4.0 and std == 0.0
    mean, std = aggregate([2.0, 6.0], convention="population")
    assert mean == 4.0 and std == 2.0  # |a-b|/2
    mean, std = aggregate([5.0])
    assert std == 0.0
    with pytest.raises(UndefinedMetricError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([1.0], convention="bogus")


def test_aggregate_reproduces_published_mean_and_std():
    mean, pop_std = aggregate(G1_DIRECT_HR, convention="population")
    _, sample_std = aggregate(G1_DIRECT_HR, convention="sample")
    assert mean == pytest.approx(32.33, abs=0.05)
    # The published table's spread follows the sample (N-1) convention.
    assert sample_std == pytest.approx(8.52, abs=0.2)
    assert abs(pop_std - 8.52) > 0.2


def test_metric_ranges_randomized():
    rng = random.Random(11)
    alphabet = string.ascii_lowercase[:6]
    for _ in range(500):
        a = " ".join("".join(rng.choices(alphabet, k=rng.randint(1, 4))) for _ in range(rng.randint(0, 8)))
        b = " ".join("".join(rng.choices(alphabet, k=rng.randint(1, 4))) for _ in range(rng.randint(0, 8)))
        for value in (bleu4(a, b), f1_token(a, b), word_mismatch(a, b)):
            assert 0.0 <= value <= 1.0


def test_scored_response_invariants():
    with pytest.raises(ValueError):
        ScoredResponse(("k", 0), "pass", "t", True, 0.0, 0.0, 0.0, True, False)
    with pytest.raises(ValueError):
        ScoredResponse(("k", 0), "title", "t", None, None, None, None, False, False)
    with pytest.raises(ValueError):
        ScoredResponse(("k", 0), "title", "t", True, 0.4, 1.0, 1.0, False, False)


def test_build_domain_report():
    responses = [scored(True, 0.0, bleu=1.0, f1=1.0), scored(False, 0.5, bleu=0.2, f1=0.4), passed()]
    report = build_domain_report("CV", responses)
    assert report.query_count == 3
    assert report.pp == pytest.approx(1 / 3)
    assert report.hr == pytest.approx(0.5 * (0.5 + 0.25))
    assert report.f1_mean == pytest.approx(0.7)
    assert report.unparseable_count == 0

    all_pass = build_domain_report("NLP", [passed(), passed()])
    assert all_pass.hr is None and all_pass.pp == 1.0 and all_pass.f1_mean is None


def test_title_exact_match_is_normalized():
    assert title_exact_match("Photo-Realistic SR!", "photo realistic sr")
    assert not title_exact_match("one title", "another title")

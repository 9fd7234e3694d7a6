"""Attribution metrics: hallucination rate, pass percentage, BLEU-4, token F1.

All comparisons are lexical. Strings are normalized to lowercase
punctuation-free token lists before comparison; author names are compared as
whole normalized name strings with set semantics.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


class UndefinedMetricError(ValueError):
    """A metric was requested over an empty population."""


def normalize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace, drop empties."""
    return text.lower().translate(_PUNCT_TABLE).split()


def title_exact_match(generated: str, truth: str) -> bool:
    """Equality of normalized token sequences. Also the SID escalation judge."""
    return normalize(generated) == normalize(truth)


def word_mismatch(generated: str, truth: str) -> float:
    """Fraction of the two strings' unique-word union absent from either side.

    The union of normalized tokens of both strings is the reference set; a
    word counts as mismatched unless it occurs in both strings. Defined as 0
    when both strings are empty.
    """
    gen = set(normalize(generated))
    tru = set(normalize(truth))
    union = gen | tru
    if not union:
        return 0.0
    return len(union - (gen & tru)) / len(union)


@dataclass(frozen=True)
class ScoredResponse:
    """One model response scored against its ground truth."""

    record_key: tuple[str, int]
    verdict_kind: str  # "pass" | "authors" | "title" | "unparseable"
    ground_truth: str
    exact_match: Optional[bool]
    word_mismatch_fraction: Optional[float]
    bleu4: Optional[float]
    f1: Optional[float]
    is_pass: bool
    is_unparseable: bool

    def __post_init__(self) -> None:
        numeric = (self.exact_match, self.word_mismatch_fraction, self.bleu4, self.f1)
        if self.is_pass:
            if any(v is not None for v in numeric):
                raise ValueError("pass responses carry no scores")
        else:
            if any(v is None for v in numeric):
                raise ValueError("answered responses must be fully scored")
            if self.exact_match and self.word_mismatch_fraction != 0.0:
                raise ValueError("exact match implies zero word mismatch")


@dataclass(frozen=True)
class DomainReport:
    """Per-domain aggregate of one (model, protocol) run slice."""

    domain: str
    query_count: int
    hr: Optional[float]  # None when every response abstained
    pp: float
    f1_mean: Optional[float]
    bleu_mean: Optional[float]
    f1_std: Optional[float]
    bleu_std: Optional[float]
    unparseable_count: int


def hallucination_rate(responses: Sequence[ScoredResponse]) -> float:
    """Mean exact-mismatch fraction and mean word-mismatch fraction, halved.

    Callers must exclude abstentions first; they are reported via
    pass_percentage, not here.
    """
    if not responses:
        raise UndefinedMetricError("hallucination rate over zero responses")
    if any(r.is_pass for r in responses):
        raise ValueError("pass responses must be excluded from hallucination rate")
    wrong = sum(1 for r in responses if not r.exact_match) / len(responses)
    word = sum(r.word_mismatch_fraction for r in responses) / len(responses)
    return 0.5 * (wrong + word)


def pass_percentage(verdict_kinds: Sequence[str]) -> float:
    """Fraction of verdicts that abstained."""
    if not verdict_kinds:
        raise UndefinedMetricError("pass percentage over zero verdicts")
    return sum(1 for k in verdict_kinds if k == "pass") / len(verdict_kinds)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, reference: str) -> float:
    """BLEU with up-to-4-gram modified precisions and brevity penalty.

    Orders with zero matches use additive smoothing (+1 to numerator and
    denominator) so short strings score smoothly instead of collapsing to 0.
    """
    cand = normalize(candidate)
    ref = normalize(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand_grams = _ngrams(cand, n)
        ref_grams = _ngrams(ref, n)
        matched = sum(min(count, ref_grams[g]) for g, count in cand_grams.items())
        total = sum(cand_grams.values())
        if matched == 0:
            matched, total = matched + 1, total + 1
        log_sum += 0.25 * math.log(matched / total)
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum)


def f1_token(candidate: str, reference: str) -> float:
    """Harmonic mean of bag-of-tokens precision and recall."""
    cand = Counter(normalize(candidate))
    ref = Counter(normalize(reference))
    if not cand or not ref:
        return 0.0
    overlap = sum((cand & ref).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(cand.values())
    recall = overlap / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


def _normalize_name(name: str) -> str:
    return " ".join(normalize(name))


def author_match(generated: Sequence[str], truth: Sequence[str]) -> tuple[bool, float]:
    """Set comparison of normalized whole-name strings.

    Returns (exact set equality, set-overlap F1). Name order never matters.
    """
    gen = {_normalize_name(n) for n in generated} - {""}
    tru = {_normalize_name(n) for n in truth} - {""}
    exact = bool(gen) and gen == tru
    if not gen or not tru:
        return exact, 0.0
    overlap = len(gen & tru)
    if overlap == 0:
        return False, 0.0
    precision = overlap / len(gen)
    recall = overlap / len(tru)
    return exact, 2 * precision * recall / (precision + recall)


STD_CONVENTIONS = ("population", "sample")


def aggregate(values: Iterable[float], convention: str = "population") -> tuple[float, float]:
    """Arithmetic mean and standard deviation of per-domain values.

    ``convention`` picks the divisor: "population" divides by N, "sample" by
    N-1. With a single value the std is 0 under either convention.
    """
    values = list(values)
    if not values:
        raise UndefinedMetricError("aggregate over zero values")
    if convention not in STD_CONVENTIONS:
        raise ValueError(f"unknown std convention {convention!r}")
    mean = sum(values) / len(values)
    if len(values) == 1:
        return mean, 0.0
    ss = sum((v - mean) ** 2 for v in values)
    divisor = len(values) if convention == "population" else len(values) - 1
    return mean, math.sqrt(ss / divisor)


def score_title_response(
    record_key: tuple[str, int],
    verdict_kind: str,
    payload: str,
    truth_title: str,
) -> ScoredResponse:
    """Score a title-protocol verdict against the true cited title.

    Unparseable replies are scored on their raw text: format noncompliance is
    a model error, not abstention.
    """
    if verdict_kind == "pass":
        return ScoredResponse(record_key, "pass", truth_title, None, None, None, None, True, False)
    exact = title_exact_match(payload, truth_title)
    return ScoredResponse(
        record_key=record_key,
        verdict_kind=verdict_kind,
        ground_truth=truth_title,
        exact_match=exact,
        word_mismatch_fraction=0.0 if exact else word_mismatch(payload, truth_title),
        bleu4=bleu4(payload, truth_title),
        f1=f1_token(payload, truth_title),
        is_pass=False,
        is_unparseable=verdict_kind == "unparseable",
    )


def score_author_response(
    record_key: tuple[str, int],
    verdict_kind: str,
    names: Sequence[str],
    raw_text: str,
    truth_authors: Sequence[str],
) -> ScoredResponse:
    """Score an author-protocol verdict against the true author list.

    Parsed lists compare as name sets; unparseable replies fall back to their
    raw text versus the joined truth.
    """
    truth_joined = ", ".join(truth_authors)
    if verdict_kind == "pass":
        return ScoredResponse(record_key, "pass", truth_joined, None, None, None, None, True, False)
    if verdict_kind == "authors":
        generated = ", ".join(names)
        exact, f1 = author_match(names, truth_authors)
    else:
        generated = raw_text
        exact, f1 = False, f1_token(generated, truth_joined)
    return ScoredResponse(
        record_key=record_key,
        verdict_kind=verdict_kind,
        ground_truth=truth_joined,
        exact_match=exact,
        word_mismatch_fraction=0.0 if exact else word_mismatch(generated, truth_joined),
        bleu4=bleu4(generated, truth_joined),
        f1=f1,
        is_pass=False,
        is_unparseable=verdict_kind == "unparseable",
    )


def build_domain_report(
    domain: str,
    responses: Sequence[ScoredResponse],
    convention: str = "population",
) -> DomainReport:
    """Aggregate one domain's scored responses into a report row.

    HR and the F1/BLEU aggregates cover answered responses only; a domain
    where every response abstained reports them as undefined (None).
    """
    if not responses:
        raise UndefinedMetricError(f"no responses for domain {domain!r}")
    answered = [r for r in responses if not r.is_pass]
    pp = pass_percentage([r.verdict_kind for r in responses])
    if answered:
        hr = hallucination_rate(answered)
        f1_mean, f1_std = aggregate([r.f1 for r in answered], convention)
        bleu_mean, bleu_std = aggregate([r.bleu4 for r in answered], convention)
    else:
        hr = f1_mean = f1_std = bleu_mean = bleu_std = None
    return DomainReport(
        domain=domain,
        query_count=len(responses),
        hr=hr,
        pp=pp,
        f1_mean=f1_mean,
        bleu_mean=bleu_mean,
        f1_std=f1_std,
        bleu_std=bleu_std,
        unparseable_count=sum(1 for r in responses if r.is_unparseable),
    )

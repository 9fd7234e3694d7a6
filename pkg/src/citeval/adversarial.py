"""Adversarial perturbation: swap cited titles or abstracts for confusables.

A confusable substitute is the most similar same-field value from another
record, measured by Ratcliff-Obershelp gestalt similarity, clearing a fixed
threshold. Only one field is ever swapped per perturbed record.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from difflib import SequenceMatcher
from typing import Optional

from .corpus import CitationRecord, Corpus, RecordKey, record_to_raw, with_field

SIMILARITY_THRESHOLD = 0.70
FIELD_TITLE = "cited_title"
FIELD_ABSTRACT = "cited_abstract"
SWAPPABLE_FIELDS = (FIELD_TITLE, FIELD_ABSTRACT)


class InsufficientPerturbableError(Exception):
    """Fewer records admit a confusable substitute than were requested."""

    def __init__(self, requested: int, achievable: int):
        super().__init__(f"requested {requested} perturbable records, only {achievable} available")
        self.requested = requested
        self.achievable = achievable


def ratcliff_obershelp(a: str, b: str) -> float:
    """Gestalt similarity 2M / (|a| + |b|).

    M totals the characters matched by recursively taking the longest common
    substring and matching the flanks. Two empty strings are fully similar.
    """
    return SequenceMatcher(None, a, b, autojunk=False).ratio()


@dataclass(frozen=True)
class PerturbedRecord:
    """A record with one metadata field swapped for a confusable value."""

    base: CitationRecord
    swapped_field: str
    substitute_source_key: RecordKey
    substitute_value: str
    similarity: float

    def as_record(self) -> CitationRecord:
        return with_field(self.base, self.swapped_field, self.substitute_value)

    def to_raw(self) -> dict:
        raw = record_to_raw(self.as_record())
        raw["swapped_field"] = "title" if self.swapped_field == FIELD_TITLE else "abstract"
        raw["substitute_source_key"] = list(self.substitute_source_key)
        raw["similarity"] = self.similarity
        return raw


def _field_value(record: CitationRecord, field: str) -> str:
    if field not in SWAPPABLE_FIELDS:
        raise ValueError(f"field must be one of {SWAPPABLE_FIELDS}, got {field!r}")
    return getattr(record, field)


def find_confusable(
    record: CitationRecord,
    corpus: Corpus,
    field: str = FIELD_TITLE,
    threshold: float = SIMILARITY_THRESHOLD,
    case_fold: bool = False,
) -> Optional[PerturbedRecord]:
    """Most similar same-field value from any other record, if it clears the threshold.

    Ties are broken toward the lexicographically smaller substitute record
    key. Candidates equal to the original value are skipped. Returns None
    when nothing qualifies.
    """
    original = _field_value(record, field)
    target = original.lower() if case_fold else original

    matcher = SequenceMatcher(None, autojunk=False)
    matcher.set_seq2(target)

    best: Optional[tuple[float, RecordKey, str]] = None
    for candidate in sorted(corpus.records, key=lambda r: r.key):
        if candidate.key == record.key:
            continue
        value = _field_value(candidate, field)
        if value == original:
            continue
        probe = value.lower() if case_fold else value
        cutoff = threshold if best is None else max(threshold, best[0])
        matcher.set_seq1(probe)
        # Upper bounds first: cheap pruning, exact ratio only for survivors.
        if matcher.real_quick_ratio() < cutoff or matcher.quick_ratio() < cutoff:
            continue
        similarity = matcher.ratio()
        if similarity < threshold:
            continue
        if best is None or similarity > best[0]:
            best = (similarity, candidate.key, value)
    if best is None:
        return None
    similarity, key, value = best
    return PerturbedRecord(
        base=record,
        swapped_field=field,
        substitute_source_key=key,
        substitute_value=value,
        similarity=similarity,
    )


def build_adversarial_set(
    corpus: Corpus,
    n: int = 200,
    field: str = FIELD_TITLE,
    seed: int = 0,
    threshold: float = SIMILARITY_THRESHOLD,
) -> list[PerturbedRecord]:
    """Seeded uniform sample of n records that admit a confusable substitute.

    Records are visited in a seeded shuffle order and kept when a substitute
    exists, so the same (corpus, n, field, seed) always yields the same set.
    """
    if n < 1:
        raise ValueError("n must be positive")
    order = list(range(len(corpus.records)))
    random.Random(seed).shuffle(order)

    chosen: list[PerturbedRecord] = []
    for i in order:
        perturbed = find_confusable(corpus.records[i], corpus, field=field, threshold=threshold)
        if perturbed is not None:
            chosen.append(perturbed)
            if len(chosen) == n:
                return chosen
    raise InsufficientPerturbableError(requested=n, achievable=len(chosen))


def write_adversarial_set(path, perturbed: list[PerturbedRecord]) -> None:
    """Persist a perturbed set in the corpus schema plus the swap annotations."""
    import json
    from pathlib import Path

    Path(path).write_text(json.dumps([p.to_raw() for p in perturbed], indent=2), "utf-8")

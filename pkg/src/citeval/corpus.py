"""Load, validate, and partition sentence-level citation corpora.

The on-disk format is a single JSON document holding an array of objects with
keys: category, link, paper_title, sentence_id, sentence, citation_text,
cited_paper_id, cited_paper_title, cited_paper_abstract, cited_paper_authors.
Records are keyed by (link, sentence_id), unique within one corpus.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

log = logging.getLogger(__name__)

RecordKey = tuple[str, int]

# Domain tags accepted by default: the twelve scientific domains covered by
# the benchmark corpora, both spelled-out and abbreviated forms.
DEFAULT_DOMAINS = frozenset(
    {
        "Artificial Intelligence",
        "AI",
        "Biomolecules",
        "Computer Vision",
        "CV",
        "Cryptography",
        "Crypto",
        "Databases",
        "Graphics",
        "Human-Computer Interaction",
        "HCI",
        "Information Retrieval",
        "IR",
        "Natural Language Processing",
        "NLP",
        "Neurons and Cognition",
        "NNC",
        "Quantum Computing",
        "QC",
        "Robotics",
    }
)

EXPECTED_KEYS = frozenset(
    {
        "category",
        "link",
        "paper_title",
        "sentence_id",
        "sentence",
        "citation_text",
        "cited_paper_id",
        "cited_paper_title",
        "cited_paper_abstract",
        "cited_paper_authors",
    }
)


class CorpusError(Exception):
    """Base class for corpus loading/validation failures."""


class MalformedDocumentError(CorpusError):
    """The file is not a JSON array of objects."""


class SchemaViolationError(CorpusError):
    """A record violates the schema (strict mode only)."""


class EmptyCorpusError(CorpusError):
    """No usable records remain."""


@dataclass(frozen=True)
class CitationRecord:
    """One sentence-level attribution instance from a source paper."""

    category: str
    source_link: str
    source_title: str
    sentence_id: int
    sentence: str
    citation_text: str
    cited_paper_id: str
    cited_title: str
    cited_abstract: str
    cited_authors: tuple[str, ...]

    @property
    def key(self) -> RecordKey:
        return (self.source_link, self.sentence_id)


@dataclass(frozen=True)
class QueryView:
    """Query-side projection: what a model is asked about."""

    key: RecordKey
    category: str
    source_title: str
    sentence: str


@dataclass(frozen=True)
class MetadataView:
    """Metadata-side projection: the cited paper's ground truth."""

    key: RecordKey
    citation_text: str
    cited_paper_id: str
    cited_title: str
    cited_abstract: str
    cited_authors: tuple[str, ...]


@dataclass
class Corpus:
    """Immutable collection of validated records plus a per-domain index."""

    records: list[CitationRecord]
    domain_index: dict[str, list[int]]
    dropped_count: int = 0
    path: Optional[str] = None

    def __len__(self) -> int:
        return len(self.records)

    def by_key(self) -> dict[RecordKey, CitationRecord]:
        return {r.key: r for r in self.records}


@dataclass
class CorpusSplit:
    """Parallel query-side and metadata-side views, keyed identically."""

    query_side: list[QueryView]
    metadata_side: list[MetadataView]


def _validate_record(raw: dict, domains: Optional[frozenset[str]]) -> CitationRecord:
    """Build a CitationRecord from one raw object, raising on violations."""
    missing = EXPECTED_KEYS - raw.keys()
    if missing:
        raise SchemaViolationError(f"missing keys: {sorted(missing)}")

    unknown = raw.keys() - EXPECTED_KEYS
    for key in sorted(unknown):
        log.warning("ignoring unknown key %r", key)

    sentence_id = raw["sentence_id"]
    if not isinstance(sentence_id, int) or isinstance(sentence_id, bool) or sentence_id < 0:
        raise SchemaViolationError(f"sentence_id must be a non-negative integer, got {sentence_id!r}")

    sentence = str(raw["sentence"])
    cited_title = str(raw["cited_paper_title"])
    if not sentence.strip():
        raise SchemaViolationError("empty sentence")
    if not cited_title.strip():
        raise SchemaViolationError("empty cited_paper_title")

    authors_raw = raw["cited_paper_authors"]
    if not isinstance(authors_raw, list) or not authors_raw:
        raise SchemaViolationError("cited_paper_authors must be a non-empty array")
    authors = tuple(str(a) for a in authors_raw)
    if any(not a.strip() for a in authors):
        raise SchemaViolationError("cited_paper_authors contains an empty name")

    category = str(raw["category"])
    if domains is not None and category not in domains:
        raise SchemaViolationError(f"category {category!r} not in the configured domain set")

    return CitationRecord(
        category=category,
        source_link=str(raw["link"]),
        source_title=str(raw["paper_title"]),
        sentence_id=sentence_id,
        sentence=sentence,
        citation_text=str(raw["citation_text"]),
        cited_paper_id=str(raw["cited_paper_id"]),
        cited_title=cited_title,
        cited_abstract=str(raw["cited_paper_abstract"]),
        cited_authors=authors,
    )


def load_corpus(
    path: str | Path,
    strict: bool = False,
    domains: Optional[frozenset[str]] = DEFAULT_DOMAINS,
) -> Corpus:
    """Load a corpus file.

    In strict mode any invalid record aborts the load; in lenient mode invalid
    records (including duplicate keys) are dropped, counted, and logged.
    Pass ``domains=None`` to accept any category tag.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)

    try:
        with path.open(encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"{path}: {exc}") from exc
    if not isinstance(data, list):
        raise MalformedDocumentError(f"{path}: top level must be an array")

    records: list[CitationRecord] = []
    seen: set[RecordKey] = set()
    dropped = 0
    for i, raw in enumerate(data):
        if not isinstance(raw, dict):
            raise MalformedDocumentError(f"{path}: entry {i} is not an object")
        try:
            record = _validate_record(raw, domains)
            if record.key in seen:
                raise SchemaViolationError(f"duplicate key {record.key}")
        except SchemaViolationError as exc:
            if strict:
                raise SchemaViolationError(f"record {i}: {exc}") from exc
            dropped += 1
            log.warning("dropping record %d: %s", i, exc)
            continue
        seen.add(record.key)
        records.append(record)

    if not records:
        raise EmptyCorpusError(f"{path}: no valid records after filtering")

    domain_index: dict[str, list[int]] = {}
    for i, record in enumerate(records):
        domain_index.setdefault(record.category, []).append(i)

    return Corpus(records=records, domain_index=domain_index, dropped_count=dropped, path=str(path))


def split_corpus(corpus: Corpus) -> CorpusSplit:
    """Partition each record into its query-side and metadata-side views."""
    if not corpus.records:
        raise EmptyCorpusError("cannot split an empty corpus")
    query_side = [
        QueryView(key=r.key, category=r.category, source_title=r.source_title, sentence=r.sentence)
        for r in corpus.records
    ]
    metadata_side = [
        MetadataView(
            key=r.key,
            citation_text=r.citation_text,
            cited_paper_id=r.cited_paper_id,
            cited_title=r.cited_title,
            cited_abstract=r.cited_abstract,
            cited_authors=r.cited_authors,
        )
        for r in corpus.records
    ]
    return CorpusSplit(query_side=query_side, metadata_side=metadata_side)


def join_split(split: CorpusSplit) -> list[CitationRecord]:
    """Rebuild full records by joining the two views on their keys."""
    if len(split.query_side) != len(split.metadata_side):
        raise CorpusError("views differ in length")
    meta_by_key = {m.key: m for m in split.metadata_side}
    if set(meta_by_key) != {q.key for q in split.query_side}:
        raise CorpusError("views differ in keys")
    joined = []
    for q in split.query_side:
        m = meta_by_key[q.key]
        joined.append(
            CitationRecord(
                category=q.category,
                source_link=q.key[0],
                source_title=q.source_title,
                sentence_id=q.key[1],
                sentence=q.sentence,
                citation_text=m.citation_text,
                cited_paper_id=m.cited_paper_id,
                cited_title=m.cited_title,
                cited_abstract=m.cited_abstract,
                cited_authors=m.cited_authors,
            )
        )
    return joined


def domain_counts(corpus: Corpus) -> dict[str, int]:
    """Record count per domain tag; values sum to the corpus length."""
    return {domain: len(idx) for domain, idx in corpus.domain_index.items()}


def record_to_raw(record: CitationRecord) -> dict:
    """Serialize a record back to the external JSON schema."""
    return {
        "category": record.category,
        "link": record.source_link,
        "paper_title": record.source_title,
        "sentence_id": record.sentence_id,
        "sentence": record.sentence,
        "citation_text": record.citation_text,
        "cited_paper_id": record.cited_paper_id,
        "cited_paper_title": record.cited_title,
        "cited_paper_abstract": record.cited_abstract,
        "cited_paper_authors": list(record.cited_authors),
    }


def sample_per_domain(corpus: Corpus, limit: Optional[int], seed: int) -> list[CitationRecord]:
    """Seeded per-domain subsample preserving corpus order within domains."""
    if limit is None:
        return list(corpus.records)
    import random

    rng = random.Random(seed)
    chosen: list[int] = []
    for domain in sorted(corpus.domain_index):
        indices = corpus.domain_index[domain]
        if len(indices) <= limit:
            chosen.extend(indices)
        else:
            chosen.extend(sorted(rng.sample(indices, limit)))
    chosen.sort()
    return [corpus.records[i] for i in chosen]


def subset(corpus: Corpus, records: Iterable[CitationRecord]) -> Corpus:
    """New Corpus over the given records (indices rebuilt)."""
    records = list(records)
    if not records:
        raise EmptyCorpusError("empty subset")
    domain_index: dict[str, list[int]] = {}
    for i, record in enumerate(records):
        domain_index.setdefault(record.category, []).append(i)
    return Corpus(records=records, domain_index=domain_index, dropped_count=0, path=corpus.path)


def with_field(record: CitationRecord, field_name: str, value: str) -> CitationRecord:
    """Copy of a record with one field replaced."""
    return replace(record, **{field_name: value})

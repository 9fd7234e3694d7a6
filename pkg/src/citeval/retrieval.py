"""Embedded document index with BM25-ranked and cross-encoder-ranked retrieval.

Documents are the metadata-side records (cited title + abstract), indexed
whole. A bi-encoder similarity exp(q . d) selects a shortlist; the naive mode
orders it by BM25, the advanced mode by a cross-encoder scoring service.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from collections import Counter
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
import requests

from .corpus import Corpus, MetadataView, RecordKey
from .metrics import normalize

log = logging.getLogger(__name__)

BM25_K1 = 1.2
BM25_B = 0.75
NAIVE_TOP_K = 2
ADVANCED_TOP_K = 40
DEFAULT_SHORTLIST = 100


class RetrievalError(Exception):
    """Base class for retrieval failures."""


class EmbedderError(RetrievalError):
    """The embedding service failed after per-document retry."""


class DimensionMismatchError(RetrievalError):
    """Vectors of unequal dimension were combined."""


class EmptyIndexError(RetrievalError):
    """Retrieval against an index with no documents."""


class RerankerUnavailableError(RetrievalError):
    """The scoring service cannot be reached; never silently downgraded."""


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class HashEmbedder:
    """Deterministic token-hashing embedder for offline runs and tests.

    Each token maps to a fixed pseudo-random unit direction derived from its
    SHA-256 digest; a text embeds as the L2-normalized sum of its token
    vectors, so texts sharing words land near each other.
    """

    def __init__(self, dim: int = 256):
        self.dim = dim
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            vec = rng.standard_normal(self.dim)
            self._token_cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            tokens = normalize(text)
            if not tokens:
                vec = np.zeros(self.dim)
                vec[0] = 1.0
            else:
                vec = np.sum([self._token_vector(t) for t in tokens], axis=0)
                vec = vec / np.linalg.norm(vec)
            out.append(vec)
        return out


class HttpEmbedder:
    """Client for an embedding endpoint: {input, model} -> {data: [{embedding}]}."""

    def __init__(self, url: str, model: str, api_key_env: str = "EMBED_API_KEY", timeout: float = 60.0):
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._session = requests.Session()

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        import os

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            response = self._session.post(
                self.url, json={"input": list(texts), "model": self.model}, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            data = response.json()["data"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise EmbedderError(f"embedding request failed: {exc}") from exc
        if len(data) != len(texts):
            raise EmbedderError(f"expected {len(texts)} embeddings, got {len(data)}")
        return [np.asarray(item["embedding"], dtype=float) for item in data]


class CachingEmbedder:
    """Disk cache around another embedder, keyed by content hash.

    Layout: one ``<sha256>.npy`` per text plus a ``manifest.json`` recording
    the embedding dimension, so reruns skip the service entirely.
    """

    def __init__(self, inner: Embedder, cache_dir: str | Path):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.cache_dir / "manifest.json"
        self._manifest = {"dim": None, "entries": 0}
        if self._manifest_path.exists():
            self._manifest = json.loads(self._manifest_path.read_text("utf-8"))

    @staticmethod
    def _key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[Optional[np.ndarray]] = [None] * len(texts)
        missing: list[int] = []
        for i, text in enumerate(texts):
            path = self.cache_dir / f"{self._key(text)}.npy"
            if path.exists():
                out[i] = np.load(path)
            else:
                missing.append(i)
        if missing:
            fresh = self.inner.embed([texts[i] for i in missing])
            for i, vec in zip(missing, fresh):
                np.save(self.cache_dir / f"{self._key(texts[i])}.npy", vec)
                out[i] = vec
            self._manifest["dim"] = int(fresh[0].shape[0])
            self._manifest["entries"] = len(list(self.cache_dir.glob("*.npy")))
            self._manifest_path.write_text(json.dumps(self._manifest), "utf-8")
        return [v for v in out]  # type: ignore[misc]


class RerankerClient(Protocol):
    def score(self, sentence: str, candidates: Sequence[str]) -> list[float]: ...


class HttpReranker:
    """Client for the cross-encoder scoring service (POST /score, GET /health)."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def score(self, sentence: str, candidates: Sequence[str]) -> list[float]:
        try:
            response = self._session.post(
                f"{self.base_url}/score",
                json={"sentence": sentence, "candidates": list(candidates)},
                timeout=self.timeout,
            )
            response.raise_for_status()
            scores = response.json()["scores"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise RerankerUnavailableError(f"scoring service failed: {exc}") from exc
        if len(scores) != len(candidates):
            raise RerankerUnavailableError(f"expected {len(candidates)} scores, got {len(scores)}")
        return [float(s) for s in scores]

    def health(self) -> dict:
        try:
            response = self._session.get(f"{self.base_url}/health", timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except (requests.RequestException, ValueError) as exc:
            raise RerankerUnavailableError(f"health check failed: {exc}") from exc


@dataclass(frozen=True)
class IndexedDocument:
    doc_id: RecordKey
    text: str
    embedding: np.ndarray
    term_frequencies: dict[str, int]
    length: int


@dataclass
class RetrievalIndex:
    documents: list[IndexedDocument]
    df: dict[str, int]
    avg_length: float
    embedding_dim: int

    def __len__(self) -> int:
        return len(self.documents)


@dataclass(frozen=True)
class RankedHit:
    doc_id: RecordKey
    bi_encoder_score: float
    rank_score: float
    rank: int


def document_text(view: MetadataView) -> str:
    return f"{view.cited_title}\n{view.cited_abstract}".strip()


def build_index(metadata_side: Sequence[MetadataView], embedder: Embedder, batch_size: int = 64) -> RetrievalIndex:
    """Embed every metadata document once and compute its lexical statistics."""
    if not metadata_side:
        raise EmptyIndexError("no metadata documents to index")
    texts = [document_text(v) for v in metadata_side]

    embeddings: list[np.ndarray] = []
    for start in range(0, len(texts), batch_size):
        batch = texts[start : start + batch_size]
        try:
            embeddings.extend(embedder.embed(batch))
        except Exception:
            # Batch failed: retry each document once before giving up.
            for text in batch:
                try:
                    embeddings.extend(embedder.embed([text]))
                except Exception as exc:
                    raise EmbedderError(f"embedding failed for document after retry: {exc}") from exc

    dim = int(embeddings[0].shape[0])
    for vec in embeddings:
        if vec.shape != (dim,):
            raise DimensionMismatchError(f"expected dimension {dim}, got {vec.shape}")

    documents = []
    df: dict[str, int] = {}
    total_length = 0
    for view, text, vec in zip(metadata_side, texts, embeddings):
        tf = dict(Counter(normalize(text)))
        length = sum(tf.values())
        total_length += length
        for term in tf:
            df[term] = df.get(term, 0) + 1
        documents.append(
            IndexedDocument(doc_id=view.key, text=text, embedding=vec, term_frequencies=tf, length=length)
        )
    return RetrievalIndex(
        documents=documents, df=df, avg_length=total_length / len(documents), embedding_dim=dim
    )


def biencoder_score(query_embedding: np.ndarray, doc_embedding: np.ndarray) -> float:
    """exp of the embedding dot product; strictly positive."""
    if query_embedding.shape != doc_embedding.shape:
        raise DimensionMismatchError(
            f"query {query_embedding.shape} vs document {doc_embedding.shape}"
        )
    return math.exp(float(np.dot(query_embedding, doc_embedding)))


def bm25_score(
    query_terms: Sequence[str],
    doc: IndexedDocument,
    index: RetrievalIndex,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> float:
    """Okapi BM25 with idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5)).

    Terms absent from the index contribute 0.
    """
    n_docs = len(index.documents)
    score = 0.0
    norm = k1 * (1.0 - b + b * doc.length / index.avg_length)
    for term in query_terms:
        tf = doc.term_frequencies.get(term, 0)
        if tf == 0:
            continue
        df = index.df.get(term, 0)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        score += idf * tf * (k1 + 1.0) / (tf + norm)
    return score


def _shortlist(
    sentence: str, index: RetrievalIndex, embedder: Embedder, size: int
) -> list[tuple[int, float]]:
    """Top-``size`` documents by raw dot product (same order as exp-dot).

    Returns (document index, dot product) sorted by score descending with
    doc_id as the deterministic tiebreak.
    """
    query_vec = embedder.embed([sentence])[0]
    if query_vec.shape != (index.embedding_dim,):
        raise DimensionMismatchError(
            f"query dimension {query_vec.shape} vs index {index.embedding_dim}"
        )
    matrix = np.stack([d.embedding for d in index.documents])
    dots = matrix @ query_vec
    order = sorted(range(len(index.documents)), key=lambda i: (-dots[i], index.documents[i].doc_id))
    return [(i, float(dots[i])) for i in order[:size]]


def retrieve_naive(
    sentence: str,
    index: RetrievalIndex,
    embedder: Embedder,
    shortlist_n: int = DEFAULT_SHORTLIST,
    top_k: int = NAIVE_TOP_K,
) -> list[RankedHit]:
    """Bi-encoder shortlist ordered by BM25; ties fall back to the bi-encoder."""
    if not index.documents:
        raise EmptyIndexError("index is empty")
    shortlist_n = min(shortlist_n, len(index.documents))
    if not (1 <= top_k <= shortlist_n):
        raise ValueError(f"need 1 <= top_k ({top_k}) <= shortlist_n ({shortlist_n})")

    query_terms = normalize(sentence)
    candidates = _shortlist(sentence, index, embedder, shortlist_n)
    scored = [
        (bm25_score(query_terms, index.documents[i], index), dot, index.documents[i].doc_id, i)
        for i, dot in candidates
    ]
    scored.sort(key=lambda item: (-item[0], -item[1], item[2]))
    return [
        RankedHit(doc_id=doc_id, bi_encoder_score=math.exp(dot), rank_score=bm25, rank=rank)
        for rank, (bm25, dot, doc_id, _) in enumerate(scored[:top_k], start=1)
    ]


def retrieve_advanced(
    sentence: str,
    index: RetrievalIndex,
    embedder: Embedder,
    reranker: RerankerClient,
    top_k: int = ADVANCED_TOP_K,
    shortlist_n: Optional[int] = None,
) -> list[RankedHit]:
    """Bi-encoder shortlist re-ranked by the cross-encoder scoring service.

    A dead scoring service raises RerankerUnavailableError; there is no
    silent fallback to lexical ranking.
    """
    if not index.documents:
        raise EmptyIndexError("index is empty")
    if shortlist_n is None:
        shortlist_n = max(DEFAULT_SHORTLIST, top_k)
    shortlist_n = min(shortlist_n, len(index.documents))
    top_k = min(top_k, shortlist_n)

    candidates = _shortlist(sentence, index, embedder, shortlist_n)
    texts = [index.documents[i].text for i, _ in candidates]
    scores = reranker.score(sentence, texts)
    if len(scores) != len(candidates):
        raise RerankerUnavailableError(f"expected {len(candidates)} scores, got {len(scores)}")
    scored = [
        (score, dot, index.documents[i].doc_id)
        for (i, dot), score in zip(candidates, scores)
    ]
    scored.sort(key=lambda item: (-item[0], -item[1], item[2]))
    return [
        RankedHit(doc_id=doc_id, bi_encoder_score=math.exp(dot), rank_score=score, rank=rank)
        for rank, (score, dot, doc_id) in enumerate(scored[:top_k], start=1)
    ]


def format_context(hits: Sequence[RankedHit], corpus: Corpus, budget: int) -> str:
    """Concatenate retrieved documents in rank order within a token budget.

    Truncation is whole-document; the top hit is always included even when it
    alone exceeds the budget.
    """
    if not hits:
        raise ValueError("no hits to format")
    by_key = corpus.by_key()
    blocks = []
    used = 0
    for hit in sorted(hits, key=lambda h: h.rank):
        record = by_key[hit.doc_id]
        block = f"{record.cited_title}\n{record.cited_abstract}".strip()
        cost = len(block.split())
        if blocks and used + cost > budget:
            break
        blocks.append(block)
        used += cost
    return "\n\n".join(blocks)

"""Experiment orchestration: sweeps, resumable persistence, and reports.

A run owns an output directory holding three artifacts: ``results.jsonl``
(one scored response per line, fixed key order), ``usage.jsonl`` (token and
latency accounting), and ``manifest.json`` (config snapshot, content hashes,
completion map, and a rolling hash chain over the result rows).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import metrics, prompting, retrieval
from .corpus import CitationRecord, Corpus, load_corpus, sample_per_domain, split_corpus
from .gateway import GenerationConfig, LlmGateway
from .metrics import DomainReport, ScoredResponse, aggregate, build_domain_report
from .prompting import (
    DIRECT_AUTHOR,
    DIRECT_AUTHOR_META,
    INDIRECT_TITLE,
    AttributionTask,
    build_direct_author,
    build_direct_author_meta,
    build_indirect,
    parse_author_reply,
    parse_title_reply,
    prepend_context,
    run_sid,
    template_hash,
)

log = logging.getLogger(__name__)

SID = "sid"
PROTOCOLS = (DIRECT_AUTHOR, DIRECT_AUTHOR_META, INDIRECT_TITLE, SID)
RETRIEVAL_MODES = ("none", "naive", "advanced")

JUDGES: dict[str, Callable[[str, str], bool]] = {
    "normalized_exact": metrics.title_exact_match,
}

RESULTS_FILE = "results.jsonl"
USAGE_FILE = "usage.jsonl"
MANIFEST_FILE = "manifest.json"
LOCK_FILE = ".lock"
GENESIS_CHAIN = "0" * 64


class ConfigError(Exception):
    """The experiment configuration is invalid."""


class LockError(Exception):
    """Another run owns the output directory."""


class NoResultsError(Exception):
    """Reporting was requested but no results exist."""


@dataclass
class ExperimentConfig:
    corpus_path: str
    output_dir: str
    protocols: tuple[str, ...] = (DIRECT_AUTHOR,)
    retrieval_mode: str = "none"
    model_name: str = "stub-model"
    endpoint_url: str = ""
    api_key_env: str = "LLM_API_KEY"
    temperature: float = 1.0
    max_tokens: int = 256
    top_p: float = 0.95
    concurrency: int = 4
    sample_limit: Optional[int] = None
    seed: int = 0
    strict_load: bool = False
    judge: str = "normalized_exact"
    embed_url: Optional[str] = None
    embed_model: Optional[str] = None
    embed_cache_dir: Optional[str] = None
    embed_dim: int = 256
    reranker_url: Optional[str] = None
    shortlist_n: int = 100
    naive_top_k: int = 2
    advanced_top_k: int = 40
    context_budget: int = 512
    std_convention: str = "population"
    retry_cap: int = 5
    backoff_base: float = 1.0

    def validate(self, reranker_available: bool = False) -> None:
        if not self.corpus_path:
            raise ConfigError("corpus_path is required")
        if not self.output_dir:
            raise ConfigError("output_dir is required")
        unknown = set(self.protocols) - set(PROTOCOLS)
        if unknown:
            raise ConfigError(f"unknown protocols: {sorted(unknown)}")
        if not self.protocols:
            raise ConfigError("at least one protocol is required")
        if self.retrieval_mode not in RETRIEVAL_MODES:
            raise ConfigError(f"retrieval_mode must be one of {RETRIEVAL_MODES}")
        if self.retrieval_mode == "advanced" and not (self.reranker_url or reranker_available):
            raise ConfigError("advanced retrieval requires a reranker endpoint")
        if SID in self.protocols and self.judge not in JUDGES:
            raise ConfigError(f"unknown judge {self.judge!r}; available: {sorted(JUDGES)}")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.std_convention not in metrics.STD_CONVENTIONS:
            raise ConfigError(f"std_convention must be one of {metrics.STD_CONVENTIONS}")


_BOOL_KEYS = {"strict_load"}
_INT_KEYS = {"max_tokens", "concurrency", "sample_limit", "seed", "embed_dim", "shortlist_n",
             "naive_top_k", "advanced_top_k", "context_budget", "retry_cap"}
_FLOAT_KEYS = {"temperature", "top_p", "backoff_base"}
_FORBIDDEN_KEYS = {"api_key", "apikey", "token", "secret"}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment; blank lines ignored."""
    mapping: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def config_from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    """Build a config from string key/values, coercing types per field."""
    fields = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    kwargs: dict = {}
    for key, value in mapping.items():
        if key.lower() in _FORBIDDEN_KEYS:
            raise ConfigError(f"{key!r} must not appear in a config file; use environment variables")
        if key == "corpus":
            key = "corpus_path"
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "protocols":
            kwargs[key] = tuple(p.strip() for p in value.split(",") if p.strip())
        elif key in _BOOL_KEYS:
            kwargs[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            kwargs[key] = None if value.lower() in ("", "none") else int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = None if value.lower() == "none" else value
    if "corpus_path" not in kwargs or "output_dir" not in kwargs:
        raise ConfigError("corpus (or corpus_path) and output_dir are required")
    return ExperimentConfig(**kwargs)


@dataclass
class RunManifest:
    config: dict
    template_hashes: dict[str, str]
    corpus_hash: str
    checkpoint_hash: Optional[str] = None
    started_at: float = 0.0
    finished_at: Optional[float] = None
    completed: list[list] = field(default_factory=list)
    failed_cells: int = 0
    chain: str = GENESIS_CHAIN

    def completed_set(self) -> set[tuple[str, str, int]]:
        return {(p, link, int(sid)) for p, link, sid in self.completed}


def _manifest_path(output_dir: Path) -> Path:
    return output_dir / MANIFEST_FILE


def _load_manifest(output_dir: Path) -> Optional[RunManifest]:
    path = _manifest_path(output_dir)
    if not path.exists():
        return None
    data = json.loads(path.read_text("utf-8"))
    return RunManifest(**data)


def _save_manifest(output_dir: Path, manifest: RunManifest) -> None:
    _manifest_path(output_dir).write_text(json.dumps(asdict(manifest), indent=2), "utf-8")


def _chain_extend(chain: str, row_line: str) -> str:
    return hashlib.sha256((chain + row_line).encode("utf-8")).hexdigest()


def verify_chain(results_dir: str | Path) -> bool:
    """Recompute the row hash chain and compare against the manifest."""
    results_dir = Path(results_dir)
    manifest = _load_manifest(results_dir)
    if manifest is None:
        return False
    chain = GENESIS_CHAIN
    results = results_dir / RESULTS_FILE
    if results.exists():
        for line in results.read_text("utf-8").splitlines():
            chain = _chain_extend(chain, line)
    return chain == manifest.chain


class _RunWriter:
    """Appends rows and keeps the manifest's completion map and chain current."""

    def __init__(self, output_dir: Path, manifest: RunManifest):
        self.output_dir = output_dir
        self.manifest = manifest
        self._results = (output_dir / RESULTS_FILE).open("a", encoding="utf-8")
        self._usage = (output_dir / USAGE_FILE).open("a", encoding="utf-8")

    def write(self, protocol: str, scored: ScoredResponse, template_h: str, model_name: str, usage: dict) -> None:
        row = {
            "record_key": list(scored.record_key),
            "protocol": protocol,
            "verdict_kind": scored.verdict_kind,
            "exact_match": scored.exact_match,
            "word_mismatch": scored.word_mismatch_fraction,
            "bleu4": scored.bleu4,
            "f1": scored.f1,
            "is_pass": scored.is_pass,
            "template_hash": template_h,
            "model_name": model_name,
        }
        line = json.dumps(row, ensure_ascii=False)
        self._results.write(line + "\n")
        self._usage.write(json.dumps({"record_key": list(scored.record_key), "protocol": protocol,
                                      "model_name": model_name, **usage}, ensure_ascii=False) + "\n")
        self.manifest.chain = _chain_extend(self.manifest.chain, line)
        self.manifest.completed.append([protocol, scored.record_key[0], scored.record_key[1]])

    def flush(self) -> None:
        self._results.flush()
        self._usage.flush()
        _save_manifest(self.output_dir, self.manifest)

    def close(self) -> None:
        self.flush()
        self._results.close()
        self._usage.close()


def _acquire_lock(output_dir: Path) -> Path:
    lock = output_dir / LOCK_FILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"{output_dir} is locked by another run (remove {lock} if stale)") from None
    with os.fdopen(fd, "w") as fh:
        fh.write(str(os.getpid()))
    return lock


def _make_embedder(config: ExperimentConfig) -> retrieval.Embedder:
    if config.embed_url:
        inner: retrieval.Embedder = retrieval.HttpEmbedder(config.embed_url, config.embed_model or "")
    else:
        inner = retrieval.HashEmbedder(dim=config.embed_dim)
    if config.embed_cache_dir:
        return retrieval.CachingEmbedder(inner, config.embed_cache_dir)
    return inner


def _retrieval_query(protocol: str, record: CitationRecord) -> str:
    # Title protocols retrieve on the sentence; author protocols on the title
    # the prompt is about.
    if protocol in (DIRECT_AUTHOR, DIRECT_AUTHOR_META):
        return record.cited_title
    return record.sentence


def _build_task(protocol: str, record: CitationRecord) -> AttributionTask:
    if protocol == DIRECT_AUTHOR:
        return build_direct_author(record.cited_title, record_key=record.key)
    if protocol == DIRECT_AUTHOR_META:
        return build_direct_author_meta(record.cited_title, record.cited_abstract, record_key=record.key)
    if protocol == INDIRECT_TITLE:
        return build_indirect(record.source_title, record.sentence, record_key=record.key)
    raise ValueError(f"no single-shot builder for protocol {protocol!r}")


def _score_verdict(protocol: str, record: CitationRecord, verdict: prompting.ModelVerdict) -> ScoredResponse:
    if protocol in (DIRECT_AUTHOR, DIRECT_AUTHOR_META):
        return metrics.score_author_response(
            record.key, verdict.kind, verdict.authors or (), verdict.raw_text, list(record.cited_authors)
        )
    return metrics.score_title_response(
        record.key, verdict.kind, verdict.title if verdict.title is not None else verdict.raw_text,
        record.cited_title,
    )


def run(
    config: ExperimentConfig,
    gateway=None,
    embedder: Optional[retrieval.Embedder] = None,
    reranker: Optional[retrieval.RerankerClient] = None,
) -> RunManifest:
    """Execute every (record, protocol) cell, resuming past completed ones.

    Injected gateway/embedder/reranker objects take precedence over the
    endpoints named in the config; results are persisted incrementally so an
    interrupted run loses at most the in-flight batch.
    """
    config.validate(reranker_available=reranker is not None)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(config.corpus_path, strict=config.strict_load, domains=None)
    records = sample_per_domain(corpus, config.sample_limit, config.seed)
    corpus_hash = hashlib.sha256(Path(config.corpus_path).read_bytes()).hexdigest()

    gen_config = GenerationConfig(
        model_name=config.model_name,
        endpoint_url=config.endpoint_url,
        api_key_env=config.api_key_env,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        top_p=config.top_p,
    )
    if gateway is None:
        gateway = LlmGateway(retry_cap=config.retry_cap, backoff_base=config.backoff_base, seed=config.seed)

    index = None
    if config.retrieval_mode != "none":
        embedder = embedder or _make_embedder(config)
        index = retrieval.build_index(split_corpus(corpus).metadata_side, embedder)
    checkpoint_hash = None
    if config.retrieval_mode == "advanced":
        if reranker is None:
            reranker = retrieval.HttpReranker(config.reranker_url)
        health = getattr(reranker, "health", None)
        if callable(health):
            try:
                checkpoint_hash = health().get("checkpoint_hash")
            except retrieval.RerankerUnavailableError:
                raise
            except Exception:  # pragma: no cover - optional metadata only
                checkpoint_hash = None

    hashes = {kind: template_hash(kind) for kind in prompting.TASK_KINDS}
    hashes["rag_context"] = template_hash("rag_context")

    lock = _acquire_lock(output_dir)
    try:
        manifest = _load_manifest(output_dir)
        if manifest is None:
            manifest = RunManifest(
                config=asdict(config), template_hashes=hashes, corpus_hash=corpus_hash,
                checkpoint_hash=checkpoint_hash, started_at=time.time(),
            )
        else:
            if manifest.corpus_hash != corpus_hash:
                raise ConfigError("corpus file changed since the original run; refusing to resume")
            manifest.finished_at = None
        done = manifest.completed_set()
        writer = _RunWriter(output_dir, manifest)
        try:
            for protocol in config.protocols:
                pending = [r for r in records if (protocol, r.key[0], r.key[1]) not in done]
                if not pending:
                    continue
                log.info("protocol %s: %d pending cells", protocol, len(pending))
                if protocol == SID:
                    _run_sid_cells(config, gateway, gen_config, index, embedder, reranker, pending, writer, hashes)
                else:
                    _run_batch_cells(config, gateway, gen_config, index, embedder, reranker,
                                     protocol, pending, writer, hashes)
                writer.flush()
            manifest.finished_at = time.time()
        finally:
            writer.close()
    finally:
        lock.unlink(missing_ok=True)
    return manifest


def _context_for(
    config: ExperimentConfig,
    corpus_obj: Corpus,
    index,
    embedder,
    reranker,
    protocol: str,
    record: CitationRecord,
) -> Optional[str]:
    if index is None:
        return None
    query = _retrieval_query(protocol, record)
    if config.retrieval_mode == "naive":
        hits = retrieval.retrieve_naive(query, index, embedder,
                                        shortlist_n=min(config.shortlist_n, len(index.documents)),
                                        top_k=min(config.naive_top_k, len(index.documents)))
    else:
        hits = retrieval.retrieve_advanced(query, index, embedder, reranker,
                                           top_k=config.advanced_top_k, shortlist_n=config.shortlist_n)
    return retrieval.format_context(hits, corpus_obj, config.context_budget)


def _run_batch_cells(config, gateway, gen_config, index, embedder, reranker,
                     protocol, records, writer, hashes) -> None:
    corpus_obj = None
    if index is not None:
        corpus_obj = load_corpus(config.corpus_path, strict=False, domains=None)
    tasks = []
    for record in records:
        task = _build_task(protocol, record)
        if index is not None:
            context = _context_for(config, corpus_obj, index, embedder, reranker, protocol, record)
            task = prepend_context(task, context)
        tasks.append(task)

    results = gateway.complete_batch(tasks, gen_config, max_in_flight=config.concurrency)
    for record, result in zip(records, results):
        if result.error:
            writer.manifest.failed_cells += 1
            log.warning("cell (%s, %s) failed: %s", protocol, record.key, result.error)
            continue
        usage = {"prompt_tokens": result.prompt_tokens, "completion_tokens": result.completion_tokens,
                 "estimated": result.estimated_usage, "latency_ms": result.latency_ms,
                 "attempts": result.attempts}
        if protocol in (DIRECT_AUTHOR, DIRECT_AUTHOR_META):
            verdict = parse_author_reply(result.completion_text, protocol)
        else:
            verdict = parse_title_reply(result.completion_text)
        scored = _score_verdict(protocol, record, verdict)
        writer.write(protocol, scored, hashes[protocol], config.model_name, usage)


def _run_sid_cells(config, gateway, gen_config, index, embedder, reranker,
                   records, writer, hashes) -> None:
    judge = JUDGES[config.judge]
    corpus_obj = None
    if index is not None:
        corpus_obj = load_corpus(config.corpus_path, strict=False, domains=None)

    def one(record: CitationRecord):
        context = None
        if index is not None:
            context = _context_for(config, corpus_obj, index, embedder, reranker, SID, record)
        try:
            return run_sid(record, gateway, gen_config, judge, context=context)
        except prompting.SidStageError as exc:
            log.warning("cell (sid, %s) failed: %s", record.key, exc)
            return None

    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        outcomes = list(pool.map(one, records))

    for record, outcome in zip(records, outcomes):
        if outcome is None:
            writer.manifest.failed_cells += 1
            continue
        verdict, escalated = outcome
        usage = {"prompt_tokens": verdict.prompt_tokens, "completion_tokens": verdict.completion_tokens,
                 "estimated": False, "latency_ms": verdict.latency_ms,
                 "attempts": 2 if escalated else 1}
        scored = metrics.score_title_response(
            record.key, verdict.kind,
            verdict.title if verdict.title is not None else verdict.raw_text, record.cited_title,
        )
        template_h = hashes[prompting.SID_STAGE2] if escalated else hashes[prompting.SID_STAGE1]
        writer.write(SID, scored, template_h, config.model_name, usage)


# ---------------------------------------------------------------------------
# Reporting

METRIC_COLUMNS = ("hr_pct", "pp_pct", "f1", "bleu")


@dataclass
class ReportBundle:
    csv_path: Path
    txt_path: Path
    rows: list[dict]


def _response_from_row(row: dict) -> ScoredResponse:
    return ScoredResponse(
        record_key=(row["record_key"][0], int(row["record_key"][1])),
        verdict_kind=row["verdict_kind"],
        ground_truth="",
        exact_match=row["exact_match"],
        word_mismatch_fraction=row["word_mismatch"],
        bleu4=row["bleu4"],
        f1=row["f1"],
        is_pass=row["is_pass"],
        is_unparseable=row["verdict_kind"] == "unparseable",
    )


def load_rows(results_dir: str | Path) -> list[dict]:
    path = Path(results_dir) / RESULTS_FILE
    if not path.exists():
        raise NoResultsError(f"no {RESULTS_FILE} under {results_dir}")
    rows = [json.loads(line) for line in path.read_text("utf-8").splitlines() if line.strip()]
    if not rows:
        raise NoResultsError(f"{path} is empty")
    return rows


def domain_reports_from_rows(
    rows: Sequence[dict],
    key_to_domain: Callable[[tuple[str, int]], str],
    convention: str,
) -> dict[tuple[str, str], list[DomainReport]]:
    """Group rows by (model, protocol) and aggregate each domain slice."""
    grouped: dict[tuple[str, str], dict[str, list[ScoredResponse]]] = {}
    for row in rows:
        key = (row["model_name"], row["protocol"])
        domain = key_to_domain((row["record_key"][0], int(row["record_key"][1])))
        grouped.setdefault(key, {}).setdefault(domain, []).append(_response_from_row(row))
    out: dict[tuple[str, str], list[DomainReport]] = {}
    for key, domains in grouped.items():
        out[key] = [
            build_domain_report(domain, responses, convention)
            for domain, responses in sorted(domains.items())
        ]
    return out


def _metric_value(report: DomainReport, column: str) -> Optional[float]:
    if column == "hr_pct":
        return None if report.hr is None else report.hr * 100.0
    if column == "pp_pct":
        return report.pp * 100.0
    if column == "f1":
        return report.f1_mean
    if column == "bleu":
        return report.bleu_mean
    raise ValueError(column)


def metric_table(
    reports: Sequence[DomainReport], column: str, convention: str
) -> list[tuple[str, Optional[float]]]:
    """Per-domain values plus Mean and Standard Deviation rows.

    Domains where the metric is undefined (all-pass) appear as None and are
    excluded from the aggregates.
    """
    rows: list[tuple[str, Optional[float]]] = [(r.domain, _metric_value(r, column)) for r in reports]
    defined = [v for _, v in rows if v is not None]
    if defined:
        mean, std = aggregate(defined, convention)
        rows.append(("Mean", mean))
        rows.append(("Standard Deviation", std))
    else:
        rows.append(("Mean", None))
        rows.append(("Standard Deviation", None))
    return rows


def report(results_dir: str | Path, out_dir: Optional[str | Path] = None) -> ReportBundle:
    """Emit per-domain metric tables as full-precision CSV and aligned text."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir else results_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = load_rows(results_dir)
    manifest = _load_manifest(results_dir)
    convention = "population"
    corpus_path = None
    if manifest is not None:
        convention = manifest.config.get("std_convention", "population")
        corpus_path = manifest.config.get("corpus_path")

    key_map: dict[tuple[str, int], str] = {}
    if corpus_path and Path(corpus_path).exists():
        loaded = load_corpus(corpus_path, strict=False, domains=None)
        key_map = {r.key: r.category for r in loaded.records}

    def key_to_domain(key: tuple[str, int]) -> str:
        return key_map.get(key, "unknown")

    per_group = domain_reports_from_rows(rows, key_to_domain, convention)

    csv_rows: list[dict] = []
    for (model, protocol), reports_ in sorted(per_group.items()):
        tables = {column: metric_table(reports_, column, convention) for column in METRIC_COLUMNS}
        labels = [label for label, _ in tables[METRIC_COLUMNS[0]]]
        by_domain = {r.domain: r for r in reports_}
        for i, label in enumerate(labels):
            base = by_domain.get(label)
            csv_rows.append(
                {
                    "model": model,
                    "protocol": protocol,
                    "domain": label,
                    "queries": base.query_count if base else "",
                    "unparseable": base.unparseable_count if base else "",
                    **{column: tables[column][i][1] for column in METRIC_COLUMNS},
                }
            )

    csv_path = out_dir / "report.csv"
    txt_path = out_dir / "report.txt"
    _write_csv(csv_path, csv_rows)
    txt_path.write_text(render_text(csv_rows, convention), "utf-8")
    return ReportBundle(csv_path=csv_path, txt_path=txt_path, rows=csv_rows)


_CSV_FIELDS = ("model", "protocol", "domain", "queries", "unparseable") + METRIC_COLUMNS


def _write_csv(path: Path, rows: Sequence[dict]) -> None:
    import csv

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for column in METRIC_COLUMNS:
                value = out[column]
                out[column] = "" if value is None else repr(float(value))
            writer.writerow(out)


def read_report_csv(path: str | Path) -> list[dict]:
    import csv

    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = dict(raw)
            for column in METRIC_COLUMNS:
                row[column] = float(row[column]) if row[column] else None
            for column in ("queries", "unparseable"):
                row[column] = int(row[column]) if row[column] else None
            rows.append(row)
        return rows


def render_text(csv_rows: Sequence[dict], convention: str) -> str:
    """Human-readable tables: HR/PP in percent, F1/BLEU in [0,1], 2 decimals."""
    lines = [
        "Attribution report",
        f"(HR and PP are percentages; F1 and BLEU lie in [0,1]; std convention: {convention})",
    ]
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in csv_rows:
        groups.setdefault((row["model"], row["protocol"]), []).append(row)
    for (model, protocol), rows in sorted(groups.items()):
        lines.append("")
        lines.append(f"model={model} protocol={protocol}")
        width = max(len(str(r["domain"])) for r in rows)
        header = f"{'domain':<{width}}  {'HR%':>8}  {'PP%':>8}  {'F1':>8}  {'BLEU':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for row in rows:
            cells = []
            for column in METRIC_COLUMNS:
                value = row[column]
                cells.append(f"{value:>8.2f}" if value is not None else f"{'n/a':>8}")
            lines.append(f"{str(row['domain']):<{width}}  " + "  ".join(cells))
    return "\n".join(lines) + "\n"


def cost_summary(results_dir: str | Path, price_per_1k: Optional[dict[str, float]] = None) -> dict[str, dict]:
    """Token totals per model, optionally priced per 1K total tokens."""
    path = Path(results_dir) / USAGE_FILE
    totals: dict[str, dict] = {}
    if not path.exists():
        return totals
    for line in path.read_text("utf-8").splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        model = entry["model_name"]
        bucket = totals.setdefault(
            model, {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0,
                    "estimated": False, "cost": None}
        )
        bucket["prompt_tokens"] += int(entry.get("prompt_tokens", 0))
        bucket["completion_tokens"] += int(entry.get("completion_tokens", 0))
        bucket["total_tokens"] = bucket["prompt_tokens"] + bucket["completion_tokens"]
        bucket["estimated"] = bucket["estimated"] or bool(entry.get("estimated"))
    if price_per_1k:
        for model, bucket in totals.items():
            price = price_per_1k.get(model)
            if price is not None:
                bucket["cost"] = bucket["total_tokens"] / 1000.0 * price
    return totals

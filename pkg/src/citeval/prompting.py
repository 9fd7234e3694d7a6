"""Prompt protocols, reply parsing, and the two-stage escalation controller.

Four protocols are supported: author attribution from a bare title
(DIRECT_AUTHOR), the same with the cited abstract as metadata
(DIRECT_AUTHOR_META), title attribution from a quoted sentence
(INDIRECT_TITLE), and the sequential protocol that retries an indirect query
as a metadata-enriched one when the first stage abstains or misses
(SID_STAGE1/SID_STAGE2). Prompt text lives in versioned template files whose
hashes ride along with every result.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional, TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import CitationRecord, RecordKey
    from .gateway import GenerationConfig, LlmGateway

DIRECT_AUTHOR = "direct_author"
DIRECT_AUTHOR_META = "direct_author_meta"
INDIRECT_TITLE = "indirect_title"
SID_STAGE1 = "sid_stage1"
SID_STAGE2 = "sid_stage2"

TASK_KINDS = (DIRECT_AUTHOR, DIRECT_AUTHOR_META, INDIRECT_TITLE, SID_STAGE1, SID_STAGE2)

_TEMPLATE_FILES = {
    DIRECT_AUTHOR: "direct_author.txt",
    DIRECT_AUTHOR_META: "direct_author_meta.txt",
    INDIRECT_TITLE: "indirect_title.txt",
    SID_STAGE1: "indirect_title.txt",
    SID_STAGE2: "sid_stage2.txt",
    "rag_context": "rag_context.txt",
}

_AUTHOR_ARRAY_RE = re.compile(r"\[[^\[\]]*\]", re.DOTALL)
_AUTHOR_TAG_RE = re.compile(r"<authors>(.*?)</authors>", re.DOTALL | re.IGNORECASE)


class PromptInputError(ValueError):
    """A required prompt input is empty."""


class SidStageError(RuntimeError):
    """Gateway failure during the sequential protocol, annotated with the stage."""

    def __init__(self, stage: int, cause: Exception):
        super().__init__(f"stage {stage} gateway call failed: {cause}")
        self.stage = stage


def load_template(kind: str) -> str:
    return resources.files("citeval.templates").joinpath(_TEMPLATE_FILES[kind]).read_text("utf-8")


def template_hash(kind: str) -> str:
    return hashlib.sha256(load_template(kind).encode("utf-8")).hexdigest()


def _escape_quoted(value: str) -> str:
    # Values interpolated inside double quotes must not terminate the span.
    return value.replace('"', '\\"')


@dataclass(frozen=True)
class AttributionTask:
    """A single rendered prompt job."""

    kind: str
    rendered_prompt: str
    record_key: Optional["RecordKey"] = None
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if not self.rendered_prompt:
            raise ValueError("rendered prompt is empty")


@dataclass(frozen=True)
class ModelVerdict:
    """A parsed model reply.

    ``kind`` is one of "pass", "authors", "title", "unparseable"; the payload
    field matching the kind is set, the others stay None.
    """

    raw_text: str
    kind: str
    authors: Optional[tuple[str, ...]] = None
    title: Optional[str] = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0


def build_direct_author(cited_title: str, record_key=None) -> AttributionTask:
    """Author-attribution prompt from the cited paper's title alone."""
    if not cited_title.strip():
        raise PromptInputError("cited title is empty")
    prompt = load_template(DIRECT_AUTHOR).format(title=_escape_quoted(cited_title))
    return AttributionTask(kind=DIRECT_AUTHOR, rendered_prompt=prompt, record_key=record_key)


def build_direct_author_meta(cited_title: str, cited_abstract: str, record_key=None) -> AttributionTask:
    """Author-attribution prompt carrying the cited abstract as metadata.

    An empty abstract still builds (the task is merely degenerate) so corpora
    with missing abstracts remain runnable.
    """
    if not cited_title.strip():
        raise PromptInputError("cited title is empty")
    degenerate = not cited_abstract.strip()
    prompt = load_template(DIRECT_AUTHOR_META).format(
        title=_escape_quoted(cited_title),
        abstract=_escape_quoted(cited_abstract),
    )
    return AttributionTask(
        kind=DIRECT_AUTHOR_META, rendered_prompt=prompt, record_key=record_key, degenerate=degenerate
    )


def build_indirect(source_title: str, sentence: str, record_key=None, kind: str = INDIRECT_TITLE) -> AttributionTask:
    """Title-attribution prompt from a quoted sentence and its source paper."""
    if not source_title.strip():
        raise PromptInputError("source title is empty")
    if not sentence.strip():
        raise PromptInputError("sentence is empty")
    if kind not in (INDIRECT_TITLE, SID_STAGE1):
        raise ValueError(f"indirect builder cannot render {kind!r}")
    prompt = load_template(INDIRECT_TITLE).format(title=_escape_quoted(source_title), sentence=sentence)
    return AttributionTask(kind=kind, rendered_prompt=prompt, record_key=record_key)


def build_sid_stage2(
    source_title: str,
    sentence: str,
    cited_abstract: str,
    cited_authors: list[str] | tuple[str, ...],
    record_key=None,
) -> AttributionTask:
    """Metadata-enriched verify-then-answer prompt for the escalation stage."""
    if not source_title.strip():
        raise PromptInputError("source title is empty")
    if not sentence.strip():
        raise PromptInputError("sentence is empty")
    template = load_template(SID_STAGE2)
    degenerate = not cited_authors
    if degenerate:
        template = "\n".join(line for line in template.splitlines() if "{authors}" not in line) + "\n"
    prompt = template.format(
        title=_escape_quoted(source_title),
        sentence=_escape_quoted(sentence),
        abstract=_escape_quoted(cited_abstract),
        **({} if degenerate else {"authors": _escape_quoted(", ".join(cited_authors))}),
    )
    return AttributionTask(kind=SID_STAGE2, rendered_prompt=prompt, record_key=record_key, degenerate=degenerate)


def prepend_context(task: AttributionTask, context: str) -> AttributionTask:
    """Wrap a task's prompt with a retrieved-context block."""
    wrapped = load_template("rag_context").format(context=context, prompt=task.rendered_prompt)
    return AttributionTask(
        kind=task.kind, rendered_prompt=wrapped, record_key=task.record_key, degenerate=task.degenerate
    )


def _is_pass_token(text: str) -> bool:
    from .metrics import normalize

    return normalize(text) == ["pass"]


def parse_author_reply(raw: str, protocol: str = DIRECT_AUTHOR, **usage) -> ModelVerdict:
    """Parse an author-protocol completion.

    DIRECT_AUTHOR expects a bracketed array of quoted names (or ["pass"]);
    DIRECT_AUTHOR_META expects <authors>...</authors> with comma-separated
    names (or a pass tag). The first well-formed fragment wins; surrounding
    prose is tolerated but a missing grammar yields an unparseable verdict,
    never a pass.
    """
    if protocol == DIRECT_AUTHOR:
        for match in _AUTHOR_ARRAY_RE.finditer(raw):
            try:
                parsed = json.loads(match.group(0))
            except json.JSONDecodeError:
                continue
            if not isinstance(parsed, list) or not parsed or not all(isinstance(x, str) for x in parsed):
                continue
            if len(parsed) == 1 and _is_pass_token(parsed[0]):
                return ModelVerdict(raw_text=raw, kind="pass", **usage)
            return ModelVerdict(raw_text=raw, kind="authors", authors=tuple(parsed), **usage)
        return ModelVerdict(raw_text=raw, kind="unparseable", **usage)
    if protocol == DIRECT_AUTHOR_META:
        match = _AUTHOR_TAG_RE.search(raw)
        if not match:
            return ModelVerdict(raw_text=raw, kind="unparseable", **usage)
        body = match.group(1).strip()
        if _is_pass_token(body):
            return ModelVerdict(raw_text=raw, kind="pass", **usage)
        names = tuple(name.strip() for name in body.split(",") if name.strip())
        if not names:
            return ModelVerdict(raw_text=raw, kind="unparseable", **usage)
        return ModelVerdict(raw_text=raw, kind="authors", authors=names, **usage)
    raise ValueError(f"not an author protocol: {protocol!r}")


def parse_title_reply(raw: str, **usage) -> ModelVerdict:
    """Parse a title-protocol completion: the pass token or a bare title."""
    if _is_pass_token(raw):
        return ModelVerdict(raw_text=raw, kind="pass", **usage)
    return ModelVerdict(raw_text=raw, kind="title", title=raw.strip(), **usage)


TitleJudge = Callable[[str, str], bool]


def run_sid(
    record: "CitationRecord",
    gateway: "LlmGateway",
    config: "GenerationConfig",
    judge: TitleJudge,
    context: Optional[str] = None,
) -> tuple[ModelVerdict, bool]:
    """Drive the two-stage sequential protocol for one record.

    Stage 1 issues the plain indirect query. Escalation to the
    metadata-enriched stage happens exactly when stage 1 abstains, fails to
    parse, or names a title the judge rejects against the ground truth; the
    escalated verdict is final and carries both stages' token usage. At most
    two model calls are ever issued. ``context`` (retrieved documents)
    prefixes both stages when given.
    """
    stage1_task = build_indirect(record.source_title, record.sentence, record_key=record.key, kind=SID_STAGE1)
    if context is not None:
        stage1_task = prepend_context(stage1_task, context)
    try:
        stage1 = gateway.complete(stage1_task, config)
    except Exception as exc:
        raise SidStageError(1, exc) from exc
    verdict = parse_title_reply(
        stage1.completion_text,
        prompt_tokens=stage1.prompt_tokens,
        completion_tokens=stage1.completion_tokens,
        latency_ms=stage1.latency_ms,
    )
    if verdict.kind == "title" and judge(verdict.title, record.cited_title):
        return verdict, False

    stage2_task = build_sid_stage2(
        record.source_title,
        record.sentence,
        record.cited_abstract,
        list(record.cited_authors),
        record_key=record.key,
    )
    if context is not None:
        stage2_task = prepend_context(stage2_task, context)
    try:
        stage2 = gateway.complete(stage2_task, config)
    except Exception as exc:
        raise SidStageError(2, exc) from exc
    verdict = parse_title_reply(
        stage2.completion_text,
        prompt_tokens=stage1.prompt_tokens + stage2.prompt_tokens,
        completion_tokens=stage1.completion_tokens + stage2.completion_tokens,
        latency_ms=stage1.latency_ms + stage2.latency_ms,
    )
    return verdict, True

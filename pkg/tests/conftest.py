"""Shared fixtures: corpus builders and gateway stubs."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from citeval.gateway import GatewayError, GatewayResult
from citeval.prompting import DIRECT_AUTHOR, DIRECT_AUTHOR_META

SAMPLE_AUTHORS = [
    "Christian Ledig", "Lucas Theis", "Ferenc Huszar", "Jose Caballero",
    "Andrew Cunningham", "Alejandro Acosta", "Andrew Aitken", "Alykhan Tejani",
    "Johannes Totz", "Zehan Wang", "Wenzhe Shi",
]

SAMPLE_RAW = {
    "category": "Computer Vision",
    "link": "http://arxiv.org/abs/2012.05435v2",
    "paper_title": "Optimization-Inspired Learning with Architecture Augmentations "
                   "and Control Mechanisms for Low-Level Vision",
    "sentence_id": 32,
    "sentence": "We adopt the l1-norm. For GM, we establish a residual network with seven "
                "convolution layers and six ReLU blocks, which are plugged behind each "
                "convolution layer.",
    "citation_text": 'C. Ledig et al., "Photo-realistic single image super-resolution using '
                     'a generative adversarial network," in CVPR, 2017, pp. 105-114.',
    "cited_paper_id": "arXiv:1609.04802",
    "cited_paper_title": "Photo-Realistic Single Image Super-Resolution Using a "
                         "Generative Adversarial Network",
    "cited_paper_abstract": "Despite the breakthroughs in accuracy and speed of single-image "
                            "super-resolution using faster and deeper convolutional neural networks...",
    "cited_paper_authors": SAMPLE_AUTHORS,
}


def raw_record(i=0, category="CV", **over):
    raw = {
        "category": category,
        "link": f"http://example.org/paper/{i}",
        "paper_title": f"Source Paper {i}",
        "sentence_id": i,
        "sentence": f"We build on earlier findings about structured topic {i} models.",
        "citation_text": f'A. Author, "Cited Paper {i}," 2020.',
        "cited_paper_id": f"id:{i}",
        "cited_paper_title": f"Cited Paper {i} on Structured Topics",
        "cited_paper_abstract": f"This paper studies structured topic {i} in depth.",
        "cited_paper_authors": [f"Alice Author{i}", f"Bob Writer{i}"],
    }
    raw.update(over)
    return raw


def write_corpus(path: Path, raws: list[dict]) -> Path:
    path.write_text(json.dumps(raws, indent=1), "utf-8")
    return path


@pytest.fixture
def tiny_corpus_path(tmp_path):
    raws = [raw_record(i, category="CV" if i % 2 == 0 else "NLP") for i in range(6)]
    return write_corpus(tmp_path / "corpus.json", raws)


class StubGateway:
    """Base for in-process gateways; batch semantics match the real client."""

    def __init__(self):
        self.calls = 0

    def complete(self, task, config):  # pragma: no cover - overridden
        raise NotImplementedError

    def complete_batch(self, tasks, config, max_in_flight=1):
        out = []
        for task in tasks:
            try:
                out.append(self.complete(task, config))
            except GatewayError as exc:
                out.append(GatewayResult(completion_text="", error=str(exc)))
        return out


class OracleGateway(StubGateway):
    """Replies with the ground truth in each protocol's output grammar."""

    def __init__(self, corpus):
        super().__init__()
        self.by_key = corpus.by_key()

    def complete(self, task, config):
        self.calls += 1
        record = self.by_key[task.record_key]
        if task.kind == DIRECT_AUTHOR:
            text = json.dumps(list(record.cited_authors))
        elif task.kind == DIRECT_AUTHOR_META:
            text = f"<authors>{', '.join(record.cited_authors)}</authors>"
        else:
            text = record.cited_title
        return GatewayResult(completion_text=text, prompt_tokens=10, completion_tokens=5)


class PassGateway(StubGateway):
    """Abstains in each protocol's designated grammar."""

    def complete(self, task, config):
        self.calls += 1
        if task.kind == DIRECT_AUTHOR:
            text = '["pass"]'
        elif task.kind == DIRECT_AUTHOR_META:
            text = "<authors>pass</authors>"
        else:
            text = "pass"
        return GatewayResult(completion_text=text, prompt_tokens=10, completion_tokens=1)


class ScriptedGateway(StubGateway):
    """Plays back a fixed list of completion texts."""

    def __init__(self, replies):
        super().__init__()
        self.replies = list(replies)

    def complete(self, task, config):
        self.calls += 1
        if not self.replies:
            raise AssertionError("scripted gateway ran out of replies")
        return GatewayResult(completion_text=self.replies.pop(0), prompt_tokens=4, completion_tokens=2)


class FailingGateway(StubGateway):
    """Raises a gateway error for the configured record keys."""

    def __init__(self, inner, fail_keys):
        super().__init__()
        self.inner = inner
        self.fail_keys = set(fail_keys)

    def complete(self, task, config):
        self.calls += 1
        if task.record_key in self.fail_keys:
            raise GatewayError(f"injected failure for {task.record_key}")
        return self.inner.complete(task, config)

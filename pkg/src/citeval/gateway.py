"""Uniform client for chat-completion HTTP endpoints.

Sends the whole prompt as a single user message, retries transient failures
with exponential backoff, and accounts token usage. API keys are read from
the environment and never logged or persisted.
"""

from __future__ import annotations

import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import requests

log = logging.getLogger(__name__)

# Generation defaults shared by every evaluated endpoint.
DEFAULT_TEMPERATURE = 1.0
DEFAULT_MAX_TOKENS = 256
DEFAULT_TOP_P = 0.95


class GatewayError(Exception):
    """Base class for gateway failures."""


class AuthFailureError(GatewayError):
    """401/403 or missing key; never retried."""


class RateLimitedError(GatewayError):
    """429; retried."""


class EndpointTimeoutError(GatewayError):
    """Request timed out; retried."""


class ExhaustedRetriesError(GatewayError):
    """Retry cap reached without a successful completion."""


class MalformedResponseError(GatewayError):
    """The endpoint replied but not in the expected shape."""


@dataclass(frozen=True)
class GenerationConfig:
    """Endpoint coordinates plus sampling settings."""

    model_name: str
    endpoint_url: str
    api_key_env: str = "LLM_API_KEY"
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    top_p: float = DEFAULT_TOP_P


@dataclass
class GatewayResult:
    """One completion with usage accounting; failed batch items carry error."""

    completion_text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    attempts: int = 1
    latency_ms: float = 0.0
    estimated_usage: bool = False
    error: Optional[str] = None


def _prompt_of(task) -> str:
    return getattr(task, "rendered_prompt", task)


class LlmGateway:
    """Blocking chat-completion client with bounded-concurrency batching."""

    def __init__(
        self,
        retry_cap: int = 5,
        backoff_base: float = 1.0,
        timeout: float = 60.0,
        seed: int = 0,
        session: Optional[requests.Session] = None,
    ):
        self.retry_cap = max(1, retry_cap)
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._rng = random.Random(seed)
        self._session = session or requests.Session()

    def complete(self, task: Union[str, object], config: GenerationConfig) -> GatewayResult:
        """Issue one completion, retrying transient failures with backoff."""
        prompt = _prompt_of(task)
        if not prompt:
            raise ValueError("prompt is empty")
        api_key = os.environ.get(config.api_key_env, "")
        if not api_key:
            raise AuthFailureError(f"environment variable {config.api_key_env} is not set")

        body = {
            "model": config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
            "top_p": config.top_p,
        }
        headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        log.debug("request model=%s url=%s body=%s", config.model_name, config.endpoint_url, body)

        started = time.monotonic()
        last_error: Optional[GatewayError] = None
        for attempt in range(1, self.retry_cap + 1):
            try:
                response = self._session.post(
                    config.endpoint_url, json=body, headers=headers, timeout=self.timeout
                )
            except requests.Timeout:
                last_error = EndpointTimeoutError(f"timeout after {self.timeout}s")
            except requests.RequestException as exc:
                last_error = GatewayError(f"connection failure: {exc}")
            else:
                if response.status_code in (401, 403):
                    raise AuthFailureError(f"endpoint returned {response.status_code}")
                if response.status_code == 429:
                    last_error = RateLimitedError("endpoint returned 429")
                elif response.status_code >= 500:
                    last_error = GatewayError(f"endpoint returned {response.status_code}")
                elif response.status_code >= 400:
                    raise MalformedResponseError(
                        f"endpoint returned {response.status_code}: {response.text[:200]}"
                    )
                else:
                    result = self._parse_response(response, prompt)
                    result.attempts = attempt
                    result.latency_ms = (time.monotonic() - started) * 1000.0
                    log.debug("response attempts=%d text=%r", attempt, result.completion_text[:200])
                    return result
            if attempt < self.retry_cap:
                time.sleep(self._backoff_delay(attempt))
        raise ExhaustedRetriesError(f"gave up after {self.retry_cap} attempts: {last_error}")

    def _backoff_delay(self, attempt: int) -> float:
        return self.backoff_base * (2 ** (attempt - 1)) * self._rng.uniform(0.5, 1.5)

    @staticmethod
    def _parse_response(response: requests.Response, prompt: str) -> GatewayResult:
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise MalformedResponseError(f"cannot read completion: {exc}") from exc
        usage = payload.get("usage") or {}
        prompt_tokens = usage.get("prompt_tokens")
        completion_tokens = usage.get("completion_tokens")
        estimated = prompt_tokens is None or completion_tokens is None
        if estimated:
            prompt_tokens = len(prompt.split())
            completion_tokens = len(text.split())
        return GatewayResult(
            completion_text=text,
            prompt_tokens=int(prompt_tokens),
            completion_tokens=int(completion_tokens),
            estimated_usage=estimated,
        )

    def complete_batch(
        self,
        tasks: Sequence[Union[str, object]],
        config: GenerationConfig,
        max_in_flight: int = 4,
    ) -> list[GatewayResult]:
        """Complete many prompts with at most max_in_flight outstanding.

        Results line up with the input order. A failing task yields a result
        whose ``error`` is set instead of aborting the rest of the batch.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

        def one(task) -> GatewayResult:
            try:
                return self.complete(task, config)
            except GatewayError as exc:
                return GatewayResult(completion_text="", error=f"{type(exc).__name__}: {exc}")

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(one, tasks))

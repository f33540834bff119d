"""Scoring backends.

A backend answers a :class:`ScoreRequest` with the log-probabilities of the
candidate first output tokens, keyed by token text. Only the labels matter
downstream; extra tokens are used for the floor rule.
"""

from __future__ import annotations

import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol

import httpx

from lexeval.llm.prompts import NONE_ID

log = logging.getLogger(__name__)

API_KEY_ENV = "LEXEVAL_API_KEY"
LOW_LOGPROB = -20.0
BACKEND_KINDS = ("http_openai_compatible", "mock_uniform", "mock_positional", "mock_oracle")


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScoreRequest:
    prompt: str
    labels: tuple[str, ...]
    option_ids: tuple[str, ...] = ()
    meta: Mapping = field(default_factory=dict, compare=False, hash=False)


class Backend(Protocol):
    identity: str

    def top_logprobs(self, request: ScoreRequest) -> dict[str, float]: ...


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    initial_backoff: float = 1.0
    multiplier: float = 2.0
    max_backoff: float = 30.0

    def delay(self, attempt: int) -> float:
        return min(self.max_backoff, self.initial_backoff * self.multiplier**attempt)


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock_uniform"
    model_id: str = ""
    api_base: str = "https://api.openai.com/v1"
    top_logprobs_limit: int = 20
    retry: RetryPolicy = RetryPolicy()
    parallelism: int = 4
    timeout: float = 60.0
    # fixed by design: greedy single-token answers
    temperature: float = field(default=0.0, init=False)
    max_output_tokens: int = field(default=1, init=False)

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


class UniformBackend:
    identity = "mock-uniform"

    def top_logprobs(self, request: ScoreRequest) -> dict[str, float]:
        lp = -math.log(len(request.labels))
        return {lab: lp for lab in request.labels}


class PositionalBackend:
    """Puts nearly all probability on the label shown first."""

    identity = "mock-positional"

    def __init__(self, position: int = 0, low: float = LOW_LOGPROB):
        self.position = position
        self.low = low

    def top_logprobs(self, request: ScoreRequest) -> dict[str, float]:
        return {lab: (0.0 if i == self.position else self.low) for i, lab in enumerate(request.labels)}


class OracleBackend:
    """Answers with whichever option ``resolver`` names for the request."""

    identity = "mock-oracle"

    def __init__(self, resolver: Callable[[ScoreRequest], str | None], low: float = LOW_LOGPROB):
        self.resolver = resolver
        self.low = low

    def top_logprobs(self, request: ScoreRequest) -> dict[str, float]:
        choice = self.resolver(request)
        if choice not in request.option_ids:
            raise BackendError(f"oracle has no answer among {request.option_ids} (got {choice!r})")
        pos = request.option_ids.index(choice)
        return {lab: (0.0 if i == pos else self.low) for i, lab in enumerate(request.labels)}


def meta_resolver(lexicon=None) -> Callable[[ScoreRequest], str | None]:
    """Resolve oracle answers from request metadata.

    ``gold_id`` names the option directly. Otherwise ``gold_label`` gives a
    level: the first option whose entry sits at that level is chosen, and
    N/A (or no matching option) selects the none option.
    """

    def resolve(request: ScoreRequest) -> str | None:
        meta = request.meta
        if meta.get("gold_id") is not None:
            return meta["gold_id"]
        gold = meta.get("gold_label")
        if gold is None or lexicon is None:
            return None
        for oid in request.option_ids:
            if oid != NONE_ID and lexicon[oid].level.name == gold:
                return oid
        return NONE_ID if NONE_ID in request.option_ids else None

    return resolve


class HttpBackend:
    """OpenAI-compatible chat-completions endpoint with logprobs enabled."""

    def __init__(self, config: BackendConfig, api_key: str | None = None, client: httpx.Client | None = None):
        if not config.model_id:
            raise ValueError("model_id is required for the HTTP backend")
        self.config = config
        self.identity = f"http:{config.model_id}@{config.api_base}"
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = client or httpx.Client(base_url=config.api_base.rstrip("/"), headers=headers, timeout=config.timeout)
        self._sleep = time.sleep

    def _payload(self, request: ScoreRequest) -> dict:
        return {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
            "logprobs": True,
            "top_logprobs": self.config.top_logprobs_limit,
        }

    def top_logprobs(self, request: ScoreRequest) -> dict[str, float]:
        retry = self.config.retry
        last_exc: Exception | None = None
        for attempt in range(retry.max_attempts):
            try:
                resp = self._client.post("/chat/completions", json=self._payload(request))
            except httpx.TransportError as exc:
                last_exc = exc
            else:
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_exc = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                elif resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    return parse_logprobs(resp.json())
            if attempt + 1 < retry.max_attempts:
                delay = retry.delay(attempt) * (0.5 + random.random() / 2)
                log.warning("backend request failed (%s); retrying in %.1fs", last_exc, delay)
                self._sleep(delay)
        raise BackendError(f"request failed after {retry.max_attempts} attempts: {last_exc}")

    def close(self) -> None:
        self._client.close()


def parse_logprobs(body: dict) -> dict[str, float]:
    """Extract ``token -> logprob`` at the first output position."""
    try:
        first = body["choices"][0]["logprobs"]["content"][0]
    except (KeyError, IndexError, TypeError):
        raise BackendError("response missing logprob data") from None
    out: dict[str, float] = {}
    entries = list(first.get("top_logprobs") or [])
    if "token" in first and "logprob" in first:
        entries.append({"token": first["token"], "logprob": first["logprob"]})
    for item in entries:
        tok = str(item.get("token", "")).strip()
        lp = item.get("logprob")
        if lp is None:
            continue
        lp = float(lp)
        if tok not in out or lp > out[tok]:
            out[tok] = lp
    if not out:
        raise BackendError("response missing logprob data")
    return out


class CountingBackend:
    """Wraps a backend and counts calls (thread-safe)."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.identity = inner.identity
        self.calls = 0
        self._lock = threading.Lock()

    def top_logprobs(self, request: ScoreRequest) -> dict[str, float]:
        with self._lock:
            self.calls += 1
        return self.inner.top_logprobs(request)


def make_backend(config: BackendConfig, lexicon=None, resolver=None) -> Backend:
    if config.kind == "mock_uniform":
        return UniformBackend()
    if config.kind == "mock_positional":
        return PositionalBackend()
    if config.kind == "mock_oracle":
        return OracleBackend(resolver or meta_resolver(lexicon))
    return HttpBackend(config)

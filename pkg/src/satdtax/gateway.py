"""Chat-completion providers, retrying gateway, token ledger and cost computation."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

log = logging.getLogger(__name__)

TAGS = ("explain", "generate", "merge", "assign", "naive")


class ProviderError(RuntimeError):
    """Non-retryable provider failure."""


class TransientProviderError(ProviderError):
    """Transport hiccup worth retrying (timeouts, 429, 5xx)."""


class AuthenticationError(ProviderError):
    pass


class RetriesExhausted(ProviderError):
    pass


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: TokenUsage) -> TokenUsage:
        return TokenUsage(self.input_tokens + other.input_tokens, self.output_tokens + other.output_tokens)


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    temperature: float = 1.0
    tag: str = "explain"

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")

    @property
    def key(self) -> str:
        return request_hash(self.system_text, self.user_text)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: TokenUsage


@dataclass(frozen=True)
class CostModel:
    """Prices in currency units per one million tokens."""

    input_rate: float
    output_rate: float

    def __post_init__(self):
        if self.input_rate < 0 or self.output_rate < 0:
            raise ValueError("rates must be non-negative")


@dataclass(frozen=True)
class LedgerRecord:
    tag: str
    usage: TokenUsage
    seconds: float


class RunLedger:
    """Append-only record of every successful provider call in a run."""

    def __init__(self):
        self._records: list[LedgerRecord] = []
        self._lock = threading.Lock()

    def append(self, record: LedgerRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> list[LedgerRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self):
        return len(self.records)

    @property
    def totals(self) -> TokenUsage:
        total = TokenUsage()
        for r in self.records:
            total = total + r.usage
        return total

    def by_tag(self) -> dict[str, TokenUsage]:
        out: dict[str, TokenUsage] = {}
        for r in self.records:
            out[r.tag] = out.get(r.tag, TokenUsage()) + r.usage
        return dict(sorted(out.items()))

    def call_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(r.tag for r in self.records).items()))

    def merged(self, other: RunLedger) -> RunLedger:
        out = RunLedger()
        for r in self.records + other.records:
            out.append(r)
        return out


def compute_cost(ledger: RunLedger, model: CostModel) -> float:
    usage = ledger.totals
    return usage.input_tokens * model.input_rate / 1e6 + usage.output_tokens * model.output_rate / 1e6


def request_hash(system_text: str, user_text: str) -> str:
    """Stable key for mock scripts."""
    h = hashlib.sha256()
    h.update(system_text.encode("utf-8"))
    h.update(b"\x00")
    h.update(user_text.encode("utf-8"))
    return h.hexdigest()


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


class Provider(Protocol):
    def send(self, request: ChatRequest) -> ChatResponse: ...


class MockProvider:
    """Deterministic provider driven by a script.

    Lookup order: exact request-hash match in ``replies``, then the next item
    of the ordered ``fallback`` list, then ``responder(request)``. Usage is
    synthesized from character counts (ceil(chars / 4)).

    Fallback consumption follows call order, so it is only reproducible when
    calls are not issued concurrently.
    """

    def __init__(
        self,
        replies: dict[str, str] | None = None,
        fallback: list[str] | None = None,
        responder: Callable[[ChatRequest], str] | None = None,
    ):
        self.replies = dict(replies or {})
        self.fallback = list(fallback or [])
        self.responder = responder
        self._next = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path, responder=None) -> MockProvider:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc.get("replies", {}), doc.get("fallback", []), responder)

    def send(self, request: ChatRequest) -> ChatResponse:
        text = self.replies.get(request.key)
        if text is None:
            with self._lock:
                if self._next < len(self.fallback):
                    text = self.fallback[self._next]
                    self._next += 1
        if text is None and self.responder is not None:
            text = self.responder(request)
        if text is None:
            raise ProviderError(f"mock script has no reply for request {request.key[:12]} ({request.tag})")
        usage = TokenUsage(
            estimate_tokens(request.system_text + request.user_text), estimate_tokens(text)
        )
        return ChatResponse(text, usage)


class HttpProvider:
    """OpenAI-compatible ``/chat/completions`` adapter (DeepSeek, OpenAI, vLLM, ...).

    Request body: ``{"model", "messages": [system, user], "temperature"}``.
    Reply is read from ``choices[0].message.content`` and ``usage.prompt_tokens``
    / ``usage.completion_tokens``.
    """

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 timeout: float = 300.0, client: httpx.Client | None = None):
        self.url = endpoint.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"
        self.model = model
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = client or httpx.Client(timeout=timeout)
        self.headers = headers

    def send(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "stream": False,
        }
        try:
            resp = self.client.post(self.url, json=body, headers=self.headers)
        except httpx.TransportError as e:
            raise TransientProviderError(f"transport error: {e}") from e
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"authentication failed ({resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ProviderError(f"malformed completion payload: {e}") from e
        usage = data.get("usage")
        if not isinstance(usage, dict) or "prompt_tokens" not in usage or "completion_tokens" not in usage:
            raise ProviderError("response is missing token usage")
        return ChatResponse(text or "", TokenUsage(int(usage["prompt_tokens"]), int(usage["completion_tokens"])))


class Gateway:
    """Wraps a provider with retries, a concurrency cap and a per-run ledger."""

    def __init__(
        self,
        provider: Provider,
        *,
        max_retries: int = 3,
        backoff: float = 1.0,
        max_concurrency: int = 1,
        temperature: float = 1.0,
        ledger: RunLedger | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        self.provider = provider
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_concurrency = max_concurrency
        self.temperature = temperature
        self.ledger = ledger if ledger is not None else RunLedger()
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)

    def request(self, system_text: str, user_text: str, tag: str) -> ChatRequest:
        return ChatRequest(system_text, user_text, temperature=self.temperature, tag=tag)

    def complete(self, request: ChatRequest) -> ChatResponse:
        attempts = self.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = self.backoff * 2 ** (attempt - 1)
                log.warning("retrying %s call in %.1fs (attempt %d/%d): %s",
                            request.tag, delay, attempt + 1, attempts, last)
                self._sleep(delay)
            start = time.perf_counter()
            try:
                with self._slots:
                    response = self.provider.send(request)
            except TransientProviderError as e:
                last = e
                continue
            self.ledger.append(LedgerRecord(request.tag, response.usage, time.perf_counter() - start))
            return response
        raise RetriesExhausted(f"{request.tag} call failed after {attempts} attempts: {last}") from last


@dataclass
class ProviderConfig:
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    temperature: float = 1.0
    max_retries: int = 3
    max_concurrency: int = 1
    input_per_million: float = 0.0
    output_per_million: float = 0.0
    context_limit_tokens: int = 64000
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> ProviderConfig:
        pricing = doc.get("pricing") or {}
        known = {"endpoint", "model", "api_key_env", "temperature", "max_retries",
                 "max_concurrency", "pricing", "context_limit_tokens"}
        return cls(
            endpoint=doc.get("endpoint"),
            model=doc.get("model"),
            api_key_env=doc.get("api_key_env"),
            temperature=float(doc.get("temperature", 1.0)),
            max_retries=int(doc.get("max_retries", 3)),
            max_concurrency=int(doc.get("max_concurrency", 1)),
            input_per_million=float(pricing.get("input_per_million", 0.0)),
            output_per_million=float(pricing.get("output_per_million", 0.0)),
            context_limit_tokens=int(doc.get("context_limit_tokens", 64000)),
            extra={k: v for k, v in doc.items() if k not in known},
        )

    @classmethod
    def load(cls, path) -> ProviderConfig:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config not found: {path}")
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))

    @property
    def cost_model(self) -> CostModel:
        return CostModel(self.input_per_million, self.output_per_million)

    def http_provider(self) -> HttpProvider:
        if not self.endpoint or not self.model:
            raise ProviderError("http provider needs 'endpoint' and 'model' in the config")
        key = None
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise AuthenticationError(f"environment variable {self.api_key_env} is not set")
        return HttpProvider(self.endpoint, self.model, key)

    def gateway(self, provider: Provider, ledger: RunLedger | None = None, **kw) -> Gateway:
        return Gateway(provider, max_retries=self.max_retries, max_concurrency=self.max_concurrency,
                       temperature=self.temperature, ledger=ledger, **kw)

"""Minimal chat-completion client plus deterministic mocks for offline runs.

The HTTP client posts the de facto chat-completion JSON shape
({"model", "messages": [{"role", "content"}, ...], ...}) to a configurable
endpoint, retries transient failures (timeouts, 429, 5xx) with exponential
backoff, and bounds in-flight requests per client with a semaphore. The API
key comes from an environment variable only.

Privacy posture: neither prompts nor completions are written to logs unless
``ClientConfig.unsafe_log_text`` is set; default logging carries metadata
(status, latency, retry counts) only.
"""

from __future__ import annotations

import hashlib
import logging
import os
import threading
import time
from dataclasses import dataclass

logger = logging.getLogger("sdohkit.llm")

ROLES = ("system", "user", "assistant")


class TransportError(RuntimeError):
    """Request failed after exhausting the retry budget."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ConfigurationError(ValueError):
    """Client misconfiguration (bad invariants, missing API key, plain HTTP)."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class ClientConfig:
    base_url: str
    model_name: str
    api_key_env: str = "SDOHKIT_API_KEY"
    max_tokens: int = 512
    temperature: float = 0.0
    request_timeout: float = 60.0
    max_retries: int = 3
    max_concurrent: int = 4
    backoff_base: float = 0.5
    unsafe_log_text: bool = False

    def __post_init__(self):
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")
        if self.max_concurrent < 1:
            raise ConfigurationError("max_concurrent must be >= 1")
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0")


@dataclass(frozen=True)
class Completion:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0
    retries: int = 0


def fingerprint(messages: list[ChatMessage]) -> str:
    """Stable hash of a prompt, used to key scripted mock responses."""
    h = hashlib.sha256()
    for m in messages:
        h.update(f"{m.role}:{m.content}\n".encode("utf-8"))
    return h.hexdigest()


def _check_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    for m in messages:
        if not isinstance(m, ChatMessage):
            raise TypeError("messages must be ChatMessage instances")


_RETRYABLE = {429}


def _default_transport(url: str, headers: dict, body: dict, timeout: float):
    import requests

    try:
        resp = requests.post(url, json=body, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise TransportError(f"request timed out after {timeout}s") from exc
    except requests.RequestException as exc:
        raise TransportError(f"request failed: {type(exc).__name__}") from exc
    if resp.status_code != 200:
        raise TransportError(f"endpoint returned {resp.status_code}", status=resp.status_code)
    return resp.json()


class HttpChatClient:
    """Chat-completion client with retry, backoff, and a request budget.

    ``transport`` and ``sleep`` are injectable for tests; the default
    transport uses requests. The concurrency limiter is per client object,
    so share one client across threads to enforce a single budget.
    """

    def __init__(self, config: ClientConfig, transport=None, sleep=time.sleep):
        self.config = config
        self._transport = transport or _default_transport
        self._sleep = sleep
        self._sem = threading.BoundedSemaphore(config.max_concurrent)

    def _headers(self) -> dict:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise ConfigurationError(
                f"API key environment variable {self.config.api_key_env} is not set"
            )
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _check_url(self) -> None:
        url = self.config.base_url
        host = url.split("//", 1)[-1].split("/", 1)[0].split(":", 1)[0]
        if not url.startswith("https://") and host not in ("localhost", "127.0.0.1", "::1"):
            raise ConfigurationError("non-localhost endpoints must use https")

    def complete(self, messages: list[ChatMessage]) -> Completion:
        _check_messages(messages)
        self._check_url()
        headers = self._headers()
        body = {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        }
        start = time.perf_counter()
        attempt = 0
        while True:
            try:
                with self._sem:
                    payload = self._transport(
                        self.config.base_url, headers, body, self.config.request_timeout
                    )
                break
            except TransportError as exc:
                retryable = exc.status is None or exc.status in _RETRYABLE or exc.status >= 500
                if not retryable or attempt >= self.config.max_retries:
                    logger.debug(
                        "completion failed status=%s attempts=%d", exc.status, attempt + 1
                    )
                    raise
                self._sleep(self.config.backoff_base * (2 ** attempt))
                attempt += 1
        latency = (time.perf_counter() - start) * 1000
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError("response missing choices[0].message.content") from exc
        usage = payload.get("usage") or {}
        logger.debug("completion ok latency_ms=%.0f retries=%d", latency, attempt)
        if self.config.unsafe_log_text:
            logger.debug("completion text: %s", text)
        return Completion(
            text,
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
            latency,
            attempt,
        )


class ScriptedMockClient:
    """Responds from a fingerprint-to-text script; records a transcript.

    Unknown fingerprints raise in strict mode (the default when no fallback
    response is given), otherwise return the fallback.
    """

    def __init__(self, script: dict[str, str] | None = None, default: str | None = None):
        self.script = dict(script or {})
        self.default = default
        self._lock = threading.Lock()
        self.transcript: list[tuple[str, str]] = []  # (fingerprint, response)

    def complete(self, messages: list[ChatMessage]) -> Completion:
        _check_messages(messages)
        fp = fingerprint(messages)
        if fp in self.script:
            text = self.script[fp]
        elif self.default is not None:
            text = self.default
        else:
            raise TransportError(f"no scripted response for prompt {fp[:12]}")
        with self._lock:
            self.transcript.append((fp, text))
        return Completion(text)


class EchoClient:
    """Returns the last user message verbatim; handy in smoke tests."""

    def complete(self, messages: list[ChatMessage]) -> Completion:
        _check_messages(messages)
        users = [m for m in messages if m.role == "user"]
        return Completion(users[-1].content if users else messages[-1].content)

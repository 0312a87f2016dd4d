"""Uniform LLM backend interface: live HTTP, scripted mock, record/replay.

All backends expose ``complete(request) -> CompletionResponse`` and share a
semaphore bound on in-flight calls (``max_in_flight``). Credentials for the
live backend come from the ``ADAREC_API_KEY`` environment variable only.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

from .errors import (
    BackendError,
    CassetteMiss,
    HttpStatus,
    ScriptExhausted,
    Timeout,
)

API_KEY_ENV = "ADAREC_API_KEY"
DEFAULT_TIMEOUT_SECS = 60.0
DEFAULT_MAX_IN_FLIGHT = 4


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    user: str
    system: str | None = None
    temperature: float = 0
    max_tokens: int = 1000

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    model: str
    latency: float
    usage: Mapping[str, int] | None = None


@dataclass(frozen=True)
class LlmSettings:
    """Per-run request defaults carried through the pipeline."""

    model: str = "mock-model"
    temperature: float = 0
    max_tokens: int = 1000
    system: str | None = None


def canonical_serialization(request: CompletionRequest) -> bytes:
    doc = {
        "max_tokens": request.max_tokens,
        "model": request.model,
        "system": request.system,
        "temperature": request.temperature,
        "user": request.user,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def canonical_hash(request: CompletionRequest) -> str:
    """SHA-256 hex digest of the canonical request serialization."""
    return hashlib.sha256(canonical_serialization(request)).hexdigest()


def request_body(request: CompletionRequest) -> dict:
    messages = []
    if request.system is not None:
        messages.append({"role": "system", "content": request.system})
    messages.append({"role": "user", "content": request.user})
    return {
        "model": request.model,
        "messages": messages,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }


def serialize_body(request: CompletionRequest) -> str:
    """Compact wire serialization of the chat-completions POST body."""
    return json.dumps(request_body(request), separators=(",", ":"), ensure_ascii=False)


class Backend:
    """Base: bounds in-flight calls and dispatches to ``_complete``."""

    #: True when answers depend on call order (FIFO scripts); callers should
    #: then avoid interleaving requests from concurrent workers.
    order_sensitive = False
    #: True when completions wait on the network, so caller-side concurrency
    #: up to max_in_flight actually overlaps useful work.
    io_bound = False

    def __init__(self, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.max_in_flight = max_in_flight
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._slots:
            return self._complete(request)

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError


def complete(backend: Backend, request: CompletionRequest) -> CompletionResponse:
    return backend.complete(request)


class LiveBackend(Backend):
    """Single POST to an OpenAI-style chat-completions endpoint.

    One retry on transport errors with exponential backoff; HTTP status
    errors are not retried.
    """

    io_bound = True

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout_secs: float = DEFAULT_TIMEOUT_SECS,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        backoff_secs: float = 1.0,
        session: requests.Session | None = None,
    ):
        super().__init__(max_in_flight)
        self.base_url = base_url
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout_secs = timeout_secs
        self.backoff_secs = backoff_secs
        self._session = session or requests.Session()

    def _post_once(self, payload: str) -> requests.Response:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return self._session.post(
            self.base_url,
            data=payload.encode("utf-8"),
            headers=headers,
            timeout=self.timeout_secs,
        )

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        payload = serialize_body(request)
        started = time.monotonic()
        backoff = self.backoff_secs
        for attempt in (0, 1):
            try:
                resp = self._post_once(payload)
                break
            except requests.Timeout as exc:
                if attempt == 1:
                    raise Timeout(f"no response within {self.timeout_secs}s") from exc
            except requests.RequestException as exc:
                if attempt == 1:
                    raise BackendError(f"transport error: {exc}") from exc
            time.sleep(backoff)
            backoff *= 2
        if not 200 <= resp.status_code < 300:
            raise HttpStatus(resp.status_code, resp.text)
        try:
            doc = resp.json()
            text = doc["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion payload: {exc}") from exc
        return CompletionResponse(
            text=text,
            model=doc.get("model", request.model),
            latency=time.monotonic() - started,
            usage=doc.get("usage"),
        )


class MockBackend(Backend):
    """Deterministic offline backend.

    Resolution order per request: ``handler`` (a callable on the request),
    then ``by_hash`` (keyed by canonical hash), then the FIFO ``script``.
    """

    def __init__(
        self,
        script: Sequence[str] | None = None,
        by_hash: Mapping[str, str] | None = None,
        handler: Callable[[CompletionRequest], str] | None = None,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    ):
        super().__init__(max_in_flight)
        self._script = list(script) if script else []
        self._by_hash = dict(by_hash) if by_hash else {}
        self._handler = handler
        self.order_sensitive = handler is None and not self._by_hash
        self._lock = threading.Lock()
        self.calls = 0

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.calls += 1
            if self._handler is not None:
                text = self._handler(request)
            elif self._by_hash:
                digest = canonical_hash(request)
                if digest not in self._by_hash:
                    raise ScriptExhausted(f"no scripted answer for hash {digest}")
                text = self._by_hash[digest]
            elif self._script:
                text = self._script.pop(0)
            else:
                raise ScriptExhausted("mock script is empty")
        return CompletionResponse(text=text, model=request.model, latency=0.0)


class ReplayBackend(Backend):
    """Cassette-backed backend.

    In replay mode a missing entry raises CassetteMiss and no network (or
    inner backend) activity ever happens. In record mode misses are served
    by the inner backend and appended to the cassette file.
    """

    def __init__(
        self,
        path: str | Path,
        record: bool = False,
        inner: Backend | None = None,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    ):
        super().__init__(max_in_flight)
        self.path = Path(path)
        self.record = record
        self.inner = inner
        if record and inner is None:
            raise ValueError("record mode needs an inner backend")
        self.io_bound = bool(record and inner is not None and inner.io_bound)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    doc = json.loads(line)
                    self._entries[doc["hash"]] = doc["response_text"]

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        digest = canonical_hash(request)
        with self._lock:
            if digest in self._entries:
                return CompletionResponse(
                    text=self._entries[digest], model=request.model, latency=0.0
                )
            if not self.record:
                raise CassetteMiss(digest)
        response = self.inner.complete(request)
        entry = {
            "hash": digest,
            "request": {
                "model": request.model,
                "system": request.system,
                "user": request.user,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            },
            "response_text": response.text,
            "recorded_at": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            if digest not in self._entries:
                self._entries[digest] = response.text
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return response

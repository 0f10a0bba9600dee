"""Uniform access to completion backends.

One gateway wraps any backend with a token-bucket rate limiter and
exponential-backoff retry. Backends: a live HTTPS completion endpoint, a
recording wrapper that persists (key, response) pairs as JSONL, and a
replay backend that serves only recorded keys with zero network activity.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import BackendError, RateLimited, ReplayMiss, Timeout, TransientBackendError

CACHE_SUBDIR = "llm_cache"
CACHE_FILE = "cache.jsonl"

_PAIRS_LINE = re.compile(r"^PAIRS: (\[.*\])$", re.MULTILINE)


@dataclass(frozen=True)
class PromptRequest:
    stage: int
    doc_id: str
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_output_tokens: int = 65536

    def __post_init__(self):
        if not 1 <= self.stage <= 5:
            raise ValueError(f"stage must be in [1,5], got {self.stage}")

    @property
    def payload_digest(self) -> bytes:
        return record_key(self)


@dataclass(frozen=True)
class RawResponse:
    text: str
    backend_id: str
    latency_ms: int
    attempt_count: int


def canonicalize_user_text(text: str) -> str:
    """Sort the pair list on any 'PAIRS: [...]' line so that listing order
    never changes the record key."""

    def _sort(match: re.Match) -> str:
        try:
            pairs = json.loads(match.group(1))
        except ValueError:
            return match.group(0)
        pairs = sorted(tuple(p) for p in pairs)
        return "PAIRS: " + json.dumps([list(p) for p in pairs], separators=(",", ":"))

    return _PAIRS_LINE.sub(_sort, text)


def record_key(req: PromptRequest) -> bytes:
    """32-byte key over stage, doc id, and canonicalized user text."""
    h = hashlib.sha256()
    h.update(str(req.stage).encode())
    h.update(b"\x00")
    h.update(req.doc_id.encode())
    h.update(b"\x00")
    h.update(canonicalize_user_text(req.user_text).encode())
    return h.digest()


class Backend(Protocol):
    backend_id: str
    live: bool

    def send(self, req: PromptRequest) -> str: ...


class TokenBucket:
    """Sliding-window limiter: at most `rpm` dispatches per 60 s window."""

    def __init__(self, rpm: int, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if rpm < 1:
            raise ValueError("rpm must be >= 1")
        self.rpm = rpm
        self._clock = clock
        self._sleep = sleep
        self._stamps: list[float] = []
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._stamps = [t for t in self._stamps if now - t < 60.0]
                if len(self._stamps) < self.rpm:
                    self._stamps.append(now)
                    return
                wait = 60.0 - (now - self._stamps[0])
            self._sleep(max(wait, 0.001))


class Gateway:
    """Rate-limited, retrying front door to a completion backend."""

    def __init__(
        self,
        backend: Backend,
        rpm: int = 60,
        retry_budget: int = 4,
        backoff_base: float = 1.0,
        jitter_seed: int = 0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.retry_budget = retry_budget
        self.backoff_base = backoff_base
        self._rng = random.Random(jitter_seed)
        self._clock = clock
        self._sleep = sleep
        self._bucket = TokenBucket(rpm, clock, sleep)
        self.call_count = 0

    def complete(self, req: PromptRequest) -> RawResponse:
        if not self.backend.live:
            # replay and other offline backends bypass limiter and retries
            t0 = self._clock()
            text = self.backend.send(req)
            latency = int((self._clock() - t0) * 1000)
            self.call_count += 1
            return RawResponse(text, self.backend.backend_id, latency, 1)

        last_exc: Exception | None = None
        for attempt in range(1, self.retry_budget + 2):
            self._bucket.acquire()
            t0 = self._clock()
            try:
                text = self.backend.send(req)
            except Timeout as exc:
                last_exc = exc
            except TransientBackendError as exc:
                last_exc = exc
            else:
                if not text:
                    raise BackendError("backend returned empty completion")
                latency = int((self._clock() - t0) * 1000)
                self.call_count += 1
                return RawResponse(text, self.backend.backend_id, latency, attempt)
            if attempt <= self.retry_budget:
                delay = self.backoff_base * (2 ** (attempt - 1))
                delay += self._rng.uniform(0, self.backoff_base)
                self._sleep(delay)
        if isinstance(last_exc, Timeout):
            raise last_exc
        raise RateLimited(f"retry budget ({self.retry_budget}) exhausted: {last_exc}")


# --------------------------------------------------------------------------
# Backends


class LiveBackend:
    """HTTPS JSON completion endpoint; API key comes from the environment."""

    live = True

    def __init__(self, endpoint_url: str, model: str, api_key_env: str = "SDGPB_API_KEY",
                 session: requests.Session | None = None, timeout_s: float = 300.0):
        self.endpoint_url = endpoint_url
        self.model = model
        self.backend_id = model
        self.api_key_env = api_key_env
        self.session = session or requests.Session()
        self.timeout_s = timeout_s

    def send(self, req: PromptRequest) -> str:
        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise BackendError(f"API key environment variable {self.api_key_env} not set")
        payload = {
            "model": self.model,
            "system": req.system_text,
            "user": req.user_text,
            "temperature": req.temperature,
            "max_output_tokens": req.max_output_tokens,
        }
        try:
            resp = self.session.post(
                self.endpoint_url,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.timeout_s,
            )
        except requests.Timeout as exc:
            raise Timeout(f"completion request timed out after {self.timeout_s}s") from exc
        except requests.RequestException as exc:
            raise TransientBackendError(f"transport error: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["text"]
        except (ValueError, KeyError) as exc:
            raise BackendError("malformed completion response") from exc


class RecordingBackend:
    """Wraps another backend and persists every (key, response) pair."""

    def __init__(self, inner: Backend, run_dir: str | Path):
        self.inner = inner
        self.live = inner.live
        self.backend_id = inner.backend_id
        cache_dir = Path(run_dir) / CACHE_SUBDIR
        cache_dir.mkdir(parents=True, exist_ok=True)
        self._path = cache_dir / CACHE_FILE
        self._lock = threading.Lock()
        self._seen: set[str] = set()
        if self._path.exists():
            for line in self._path.read_text("utf-8").splitlines():
                if line.strip():
                    self._seen.add(json.loads(line)["key"])

    def send(self, req: PromptRequest) -> str:
        text = self.inner.send(req)
        key = record_key(req).hex()
        entry = {
            "key": key,
            "stage": req.stage,
            "doc_id": req.doc_id,
            "backend_id": self.backend_id,
            "text": text,
        }
        with self._lock:
            if key not in self._seen:
                self._seen.add(key)
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return text


class ReplayBackend:
    """Serves only previously recorded responses; never touches the network."""

    live = False
    backend_id = "replay"

    def __init__(self, run_dir: str | Path):
        self._path = Path(run_dir) / CACHE_SUBDIR / CACHE_FILE
        self._cache: dict[str, str] = {}
        if self._path.exists():
            for line in self._path.read_text("utf-8").splitlines():
                if line.strip():
                    entry = json.loads(line)
                    self._cache[entry["key"]] = entry["text"]

    def send(self, req: PromptRequest) -> str:
        key = record_key(req).hex()
        if key not in self._cache:
            raise ReplayMiss(
                f"no recorded response for stage {req.stage}, doc {req.doc_id!r} "
                f"(key {key[:12]}...); fixture drift or edited prompt template"
            )
        return self._cache[key]


def record_session(run_dir: str | Path, inner: Backend) -> RecordingBackend:
    return RecordingBackend(inner, run_dir)


def replay_session(run_dir: str | Path) -> ReplayBackend:
    return ReplayBackend(run_dir)

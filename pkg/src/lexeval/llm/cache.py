"""Append-only response cache keyed by (model, exact prompt bytes, labels)."""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time

from lexeval.llm.backends import Backend, ScoreRequest


def cache_key(model_id: str, prompt: str, labels) -> str:
    payload = json.dumps([model_id, prompt, list(labels)], ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Line-delimited ``{key, value, timestamp}`` records; later lines win."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = os.fspath(path) if path is not None else None
        self._data: dict[str, dict[str, float]] = {}
        self._lock = threading.Lock()
        if self.path and os.path.exists(self.path):
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        # a torn final line from an interrupted run
                        continue
                    self._data[rec["key"]] = rec["value"]

    def __len__(self) -> int:
        return len(self._data)

    def get(self, key: str) -> dict[str, float] | None:
        return self._data.get(key)

    def put(self, key: str, value: dict[str, float]) -> None:
        with self._lock:
            self._data[key] = value
            if self.path:
                rec = {"key": key, "value": value, "timestamp": time.time()}
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


class CachedBackend:
    def __init__(self, inner: Backend, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.identity = inner.identity
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def top_logprobs(self, request: ScoreRequest) -> dict[str, float]:
        key = cache_key(self.identity, request.prompt, request.labels)
        hit = self.cache.get(key)
        if hit is not None:
            with self._lock:
                self.hits += 1
            return dict(hit)
        value = self.inner.top_logprobs(request)
        with self._lock:
            self.misses += 1
        self.cache.put(key, dict(value))
        return value

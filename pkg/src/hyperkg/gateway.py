"""Provider-agnostic chat completion and text embedding.

Two providers ship with the package:

* ``scripted`` — replays canned responses from fixture files, keyed by
  ``sha256(prompt):sample_index`` for completions and by exact text for
  embeddings. Bit-deterministic; the backbone of the offline test suite.
* ``live`` — HTTP chat-completion and embedding endpoints (OpenAI-style
  payloads), credentials read from an environment variable.

All embedding outputs are L2-normalized; results are cached per
(embedding_model_id, text).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .errors import ConfigError, FixtureMissError, GatewayError

COMPLETIONS_FIXTURE = "completions.json"
EMBEDDINGS_FIXTURE = "embeddings.json"


def prompt_key(prompt: str, sample_index: int) -> str:
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    return f"{digest}:{sample_index}"


@dataclass
class GatewayConfig:
    provider: str = "scripted"
    model_id: str = "scripted-chat"
    temperature: float = 0.0
    max_parallel: int = 4
    retry_max_attempts: int = 3
    retry_base_delay: float = 0.5
    embedding_model_id: str = "scripted-embed"
    api_base: str = ""
    api_key_env: str = "HYPERKG_API_KEY"
    fixtures_dir: str = ""

    def validate(self) -> None:
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_parallel < 1:
            raise ConfigError(f"max_parallel must be >= 1, got {self.max_parallel}")
        if self.provider not in ("scripted", "live"):
            raise ConfigError(f"unknown provider {self.provider!r}")


class Provider(Protocol):
    def complete(self, prompt: str, sample_index: int, temperature: float) -> str: ...

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class ScriptedProvider:
    """Fixture-backed provider for deterministic offline runs."""

    def __init__(
        self,
        completions: dict[str, str] | None = None,
        embeddings: dict[str, list[float]] | None = None,
    ):
        self.completions = dict(completions or {})
        self.embeddings = dict(embeddings or {})

    @classmethod
    def from_dir(cls, fixtures_dir: str | Path) -> "ScriptedProvider":
        root = Path(fixtures_dir)
        completions: dict[str, str] = {}
        embeddings: dict[str, list[float]] = {}
        comp_path = root / COMPLETIONS_FIXTURE
        embed_path = root / EMBEDDINGS_FIXTURE
        if comp_path.exists():
            completions = json.loads(comp_path.read_text(encoding="utf-8"))
        if embed_path.exists():
            embeddings = json.loads(embed_path.read_text(encoding="utf-8"))
        return cls(completions, embeddings)

    def register(self, prompt: str, sample_index: int, response: str) -> None:
        self.completions[prompt_key(prompt, sample_index)] = response

    def complete(self, prompt: str, sample_index: int, temperature: float) -> str:
        key = prompt_key(prompt, sample_index)
        if key not in self.completions:
            raise FixtureMissError(key)
        return self.completions[key]

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            if text not in self.embeddings:
                raise FixtureMissError(f"embedding:{text}")
            vectors.append(list(self.embeddings[text]))
        return vectors


class LiveProvider:
    """OpenAI-style HTTP chat-completion and embedding endpoints."""

    def __init__(self, config: GatewayConfig):
        if not config.api_base:
            raise ConfigError("live provider requires api_base")
        api_key = os.environ.get(config.api_key_env, "")
        if not api_key:
            raise ConfigError(f"live provider requires ${config.api_key_env} to be set")
        self.config = config
        self._headers = {"Authorization": f"Bearer {api_key}"}

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        try:
            response = httpx.post(
                self.config.api_base.rstrip("/") + path,
                json=payload,
                headers=self._headers,
                timeout=120.0,
            )
            response.raise_for_status()
        except Exception as exc:
            raise GatewayError(f"provider request to {path} failed: {exc}") from exc
        return response.json()

    def complete(self, prompt: str, sample_index: int, temperature: float) -> str:
        data = self._post(
            "/chat/completions",
            {
                "model": self.config.model_id,
                "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}],
            },
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise GatewayError(f"malformed completion response: {exc}") from exc

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        data = self._post(
            "/embeddings",
            {"model": self.config.embedding_model_id, "input": list(texts)},
        )
        try:
            return [row["embedding"] for row in data["data"]]
        except (KeyError, TypeError) as exc:
            raise GatewayError(f"malformed embedding response: {exc}") from exc


def _normalize(vector: Sequence[float]) -> list[float]:
    norm = math.sqrt(sum(v * v for v in vector))
    if norm == 0:
        raise GatewayError("embedding provider returned a zero vector")
    return [v / norm for v in vector]


@dataclass
class Gateway:
    """Retry, caching, and normalization wrapper around a provider."""

    config: GatewayConfig
    provider: Provider | None = None
    request_count: int = 0
    _embed_cache: dict[tuple[str, str], list[float]] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self) -> None:
        self.config.validate()
        if self.provider is None:
            if self.config.provider == "scripted":
                self.provider = ScriptedProvider.from_dir(self.config.fixtures_dir or ".")
            else:
                self.provider = LiveProvider(self.config)

    def _with_retries(self, call):
        attempts = max(1, self.config.retry_max_attempts)
        delay = self.config.retry_base_delay
        last: Exception | None = None
        for attempt in range(attempts):
            try:
                return call()
            except FixtureMissError:
                raise
            except GatewayError as exc:
                last = exc
                if attempt + 1 < attempts:
                    time.sleep(delay)
                    delay *= 2
        raise GatewayError(f"provider failed after {attempts} attempts: {last}") from last

    def complete(self, prompt: str, sample_index: int = 0) -> str:
        if not prompt:
            raise GatewayError("prompt must be non-empty")
        with self._lock:
            self.request_count += 1
        return self._with_retries(
            lambda: self.provider.complete(prompt, sample_index, self.config.temperature)
        )

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts or any(not t for t in texts):
            raise GatewayError("embed requires a non-empty list of non-empty texts")
        model = self.config.embedding_model_id
        missing = [t for t in texts if (model, t) not in self._embed_cache]
        if missing:
            with self._lock:
                self.request_count += 1
            vectors = self._with_retries(lambda: self.provider.embed(missing))
            if len(vectors) != len(missing):
                raise GatewayError("embedding provider returned wrong vector count")
            with self._lock:
                for text, vector in zip(missing, vectors):
                    self._embed_cache[(model, text)] = _normalize(vector)
        return [list(self._embed_cache[(model, t)]) for t in texts]


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity; inputs from Gateway.embed are already unit-norm."""
    return float(sum(x * y for x, y in zip(a, b)))

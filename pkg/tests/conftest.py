"""Shared test fixtures: deterministic offline providers."""

from __future__ import annotations

import hashlib

import numpy as np
import pytest

from hyperkg.errors import FixtureMissError
from hyperkg.gateway import Gateway, GatewayConfig, prompt_key


def hash_vector(text: str, dim: int = 32) -> list[float]:
    """Deterministic pseudo-embedding: unit vector seeded by the text hash.

    High-dimensional random vectors are near-orthogonal, so unrelated texts
    score well below any similarity threshold while identical texts score 1.
    """
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    vec = rng.normal(size=dim)
    return (vec / np.linalg.norm(vec)).tolist()


class OfflineProvider:
    """Dict-keyed completions plus hash-based embeddings with pinned overrides."""

    def __init__(
        self,
        completions: dict[str, str] | None = None,
        embeddings: dict[str, list[float]] | None = None,
        hash_fallback: bool = True,
    ):
        self.completions = dict(completions or {})
        self.embeddings = dict(embeddings or {})
        self.hash_fallback = hash_fallback
        self.served: dict[str, list[float]] = {}

    def register(self, prompt: str, sample_index: int, response: str) -> None:
        self.completions[prompt_key(prompt, sample_index)] = response

    def complete(self, prompt: str, sample_index: int, temperature: float) -> str:
        key = prompt_key(prompt, sample_index)
        if key not in self.completions:
            raise FixtureMissError(key)
        return self.completions[key]

    def embed(self, texts):
        out = []
        for text in texts:
            if text in self.embeddings:
                out.append(list(self.embeddings[text]))
            elif self.hash_fallback:
                out.append(hash_vector(text))
            else:
                raise FixtureMissError(f"embedding:{text}")
            self.served[text] = out[-1]
        return out


def make_gateway(
    completions: dict[str, str] | None = None,
    embeddings: dict[str, list[float]] | None = None,
    hash_fallback: bool = True,
    **config_kwargs,
) -> Gateway:
    provider = OfflineProvider(completions, embeddings, hash_fallback)
    config = GatewayConfig(provider="scripted", **config_kwargs)
    return Gateway(config=config, provider=provider)


@pytest.fixture
def gateway() -> Gateway:
    return make_gateway()

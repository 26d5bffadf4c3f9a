"""Text embedding for medication and diagnosis records.

The default embedder maps each token to a fixed pseudo-random vector in
[-1, 1]^dim (seeded by a hash of the token) and averages over tokens, so the
pooling math and dimensionality match a real language model without shipping
weights.  An HTTP client for an external embedding service implements the
same interface.
"""

from __future__ import annotations

import hashlib
import logging
import re
import time
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import ConfigurationError, InputValidationError

logger = logging.getLogger(__name__)

EMBEDDING_DIM = 312

DEFAULT_PROMPT = (
    "We aim to predict if the patient will experience a deterioration event "
    "in the next 24 hours (emergency response team, ICU admission, mortality). "
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class PromptTemplate:
    prefix: str = DEFAULT_PROMPT

    def __post_init__(self) -> None:
        if not self.prefix:
            raise ConfigurationError("prompt prefix must be non-empty")

    def apply(self, category_text: str) -> str:
        return self.prefix + category_text


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class HashingEmbedder:
    """Deterministic stand-in for a pretrained sentence embedder.

    Same text in, same vector out, on any machine: each token's vector comes
    from a generator seeded by the token's SHA-256 digest.
    """

    identity = "hashing-v1"

    def __init__(self, embedding_dim: int = EMBEDDING_DIM):
        if embedding_dim <= 0:
            raise ConfigurationError("embedding_dim must be positive")
        self.embedding_dim = embedding_dim
        self._token_cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "big")
            rng = np.random.default_rng(seed)
            vec = rng.uniform(-1.0, 1.0, self.embedding_dim)
            vec.flags.writeable = False
            self._token_cache[token] = vec
        return vec

    def embed(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            return np.zeros(self.embedding_dim)
        return np.mean([self.token_vector(t) for t in tokens], axis=0)


class ExternalEmbedderClient:
    """Client for an embedding HTTP service.

    Transient failures are retried a bounded number of times; a text that
    still cannot be embedded yields None, and downstream imputation treats
    the day's text vector as missing.  Only text hashes are ever logged.
    """

    def __init__(
        self,
        base_url: str,
        model_id: str,
        embedding_dim: int = EMBEDDING_DIM,
        timeout: float = 10.0,
        max_retries: int = 3,
        retry_wait: float = 0.2,
        transport: httpx.BaseTransport | None = None,
    ):
        self.identity = f"external:{model_id}"
        self.embedding_dim = embedding_dim
        self.model_id = model_id
        self.max_retries = max_retries
        self.retry_wait = retry_wait
        self._client = httpx.Client(
            base_url=base_url, timeout=timeout, transport=transport
        )

    def embed(self, text: str) -> np.ndarray | None:
        text_hash = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
        payload = {"model": self.model_id, "input": text}
        for attempt in range(1, self.max_retries + 1):
            try:
                resp = self._client.post("/embed", json=payload)
                resp.raise_for_status()
                vector = np.asarray(resp.json()["vector"], dtype=float)
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                logger.warning(
                    "embed attempt %d/%d failed for text %s: %s",
                    attempt, self.max_retries, text_hash, type(exc).__name__,
                )
                if attempt < self.max_retries:
                    time.sleep(self.retry_wait)
                continue
            if vector.shape != (self.embedding_dim,):
                raise ConfigurationError(
                    f"service returned dimension {vector.shape}, "
                    f"expected ({self.embedding_dim},)"
                )
            return vector
        logger.error("embedding unavailable for text %s after retries", text_hash)
        return None

    def close(self) -> None:
        self._client.close()


def embed_text(embedder, prompt: PromptTemplate, category_text: str) -> np.ndarray | None:
    """Embed one record's text under the shared prediction prompt.

    The prompt prefix participates in token averaging like any other text.
    """
    if not category_text:
        raise InputValidationError("category_text must be non-empty")
    return embedder.embed(prompt.apply(category_text))


def pool_day(embeddings: list[np.ndarray], embedding_dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Element-wise mean of a day's record embeddings; zeros when there are none."""
    if not embeddings:
        return np.zeros(embedding_dim)
    for vec in embeddings:
        if vec.shape != (embedding_dim,):
            raise ConfigurationError(
                f"mixed embedding dimensions: {vec.shape} vs ({embedding_dim},)"
            )
    return np.mean(embeddings, axis=0)

"""Pluggable providers: offline stand-ins and HTTP services.

Every service is a JSON-over-HTTP POST endpoint. Credentials come from an
environment variable named in the provider config and are sent as a bearer
token. Failures surface as ProviderError after bounded retries.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol, Sequence, TypeVar

import httpx
import numpy as np

from .errors import ProviderError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_IN_FLIGHT = 4
DEFAULT_ATTEMPTS = 3
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def map_bounded(fn: Callable[[T], R], items: Iterable[T], max_in_flight: int = DEFAULT_IN_FLIGHT) -> list[R]:
    """Ordered map with at most ``max_in_flight`` concurrent calls."""
    items = list(items)
    if max_in_flight <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# HTTP transport
# ---------------------------------------------------------------------------


@dataclass
class HttpService:
    endpoint: str
    token_env: str | None = None
    timeout: float = 30.0
    attempts: int = DEFAULT_ATTEMPTS
    backoff: float = 0.5
    transport: httpx.BaseTransport | None = field(default=None, repr=False)
    sleep: Callable[[float], None] = field(default=time.sleep, repr=False)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token_env:
            token = os.environ.get(self.token_env)
            if not token:
                raise ProviderError(f"environment variable {self.token_env} is not set", retryable=False)
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def post(self, body: dict[str, Any]) -> dict[str, Any]:
        headers = self._headers()
        last: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
                    resp = client.post(self.endpoint, json=body, headers=headers)
                if resp.status_code >= 500 or resp.status_code == 429:
                    last = ProviderError(f"{self.endpoint}: HTTP {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise ProviderError(f"{self.endpoint}: HTTP {resp.status_code}", retryable=False)
                data = resp.json()
                if not isinstance(data, dict):
                    raise ProviderError(f"{self.endpoint}: malformed response (not an object)", retryable=False)
                return data
            except httpx.TimeoutException as exc:
                last = ProviderError(f"{self.endpoint}: timeout ({exc})")
            except httpx.HTTPError as exc:
                last = ProviderError(f"{self.endpoint}: {exc}")
            except ValueError as exc:
                raise ProviderError(f"{self.endpoint}: malformed response ({exc})", retryable=False) from exc
            logger.warning("attempt %d/%d failed: %s", attempt + 1, self.attempts, last)
        assert last is not None
        raise last


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


class Embedder(Protocol):
    dimension: int

    def embed_tokens(self, text: str) -> np.ndarray: ...

    def embed_sentence(self, text: str) -> np.ndarray: ...


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    return matrix / np.where(norms == 0, 1.0, norms)


class HashEmbedder:
    """Deterministic offline embedder: each token maps to a fixed random unit vector.

    Two texts are similar exactly to the extent that they share tokens, which
    is enough to exercise relevance ranking hermetically.
    """

    def __init__(self, dimension: int = 64, salt: str = "") -> None:
        self.dimension = dimension
        self.salt = salt
        self._cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.sha256((self.salt + token).encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            vec = rng.standard_normal(self.dimension)
            vec /= np.linalg.norm(vec)
            self._cache[token] = vec
        return vec

    def embed_tokens(self, text: str) -> np.ndarray:
        tokens = tokenize(text) or ["<empty>"]
        return np.stack([self.token_vector(t) for t in tokens])

    def embed_sentence(self, text: str) -> np.ndarray:
        return _unit_rows(self.embed_tokens(text).mean(axis=0))


class HttpEmbedder:
    """Embedding service: ``{"input": text}`` -> ``{"embedding": [...]}``.

    The service may answer with one vector (sentence) or a list of vectors
    (tokens); both shapes are accepted.
    """

    def __init__(self, service: HttpService, dimension: int) -> None:
        self.service = service
        self.dimension = dimension

    def _call(self, text: str) -> np.ndarray:
        data = self.service.post({"input": text})
        raw = data.get("embedding")
        try:
            arr = np.asarray(raw, dtype=float)
        except (TypeError, ValueError):
            raise ProviderError("embedding service: malformed embedding", retryable=False) from None
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.dimension or arr.shape[0] == 0 or not np.all(np.isfinite(arr)):
            raise ProviderError(f"embedding service: expected rows of dimension {self.dimension}", retryable=False)
        return _unit_rows(arr)

    def embed_tokens(self, text: str) -> np.ndarray:
        return self._call(text)

    def embed_sentence(self, text: str) -> np.ndarray:
        return _unit_rows(self._call(text).mean(axis=0))


# ---------------------------------------------------------------------------
# caption refinement
# ---------------------------------------------------------------------------


class Refiner(Protocol):
    def refine(self, label: str, texts: Sequence[str]) -> str: ...


FUSION_PROMPT = (
    "The following brief captions describe the same object ({label}) seen in "
    "different image crops, most reliable first. Merge them into one accurate "
    "sentence describing the object's attributes. Do not invent details."
)


class HttpRefiner:
    """Caption fusion service: ``{"prompt", "candidates"}`` -> ``{"caption"}``."""

    def __init__(self, service: HttpService) -> None:
        self.service = service

    def refine(self, label: str, texts: Sequence[str]) -> str:
        data = self.service.post({"prompt": FUSION_PROMPT.format(label=label), "candidates": list(texts)})
        caption = data.get("caption")
        if not isinstance(caption, str) or not caption.strip():
            raise ProviderError("refinement service: malformed response (empty caption)", retryable=False)
        return caption.strip()


# ---------------------------------------------------------------------------
# judging and correction
# ---------------------------------------------------------------------------


class Judge(Protocol):
    def choose(self, prompt: str, choices: Sequence[str], context: dict[str, Any]) -> int: ...

    def score(self, kind: str, text: str, context: dict[str, Any]) -> float: ...


class Corrector(Protocol):
    def correct(self, kind: str, text: str, context: dict[str, Any]) -> str: ...


def _check_score(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
        raise ProviderError(f"judge returned invalid score {value!r}", retryable=False)
    return float(value)


class HttpJudge:
    """Judge service: ``{"kind", "text", "context"}`` -> ``{"score"}``.

    Multiple-choice prompts go to the same endpoint with ``kind="choice"``
    and the options in ``context["choices"]``; the reply carries ``index``.
    """

    def __init__(self, service: HttpService) -> None:
        self.service = service

    def choose(self, prompt: str, choices: Sequence[str], context: dict[str, Any]) -> int:
        data = self.service.post({"kind": "choice", "text": prompt, "context": {**context, "choices": list(choices)}})
        index = data.get("index")
        if isinstance(index, bool) or not isinstance(index, int):
            raise ProviderError("judge returned no choice index", retryable=False)
        return index

    def score(self, kind: str, text: str, context: dict[str, Any]) -> float:
        return _check_score(self.service.post({"kind": kind, "text": text, "context": context}).get("score"))


class HttpCorrector:
    """Value-function correction service: ``{"text", "context"}`` -> ``{"text"}``."""

    def __init__(self, service: HttpService) -> None:
        self.service = service

    def correct(self, kind: str, text: str, context: dict[str, Any]) -> str:
        out = self.service.post({"text": text, "context": {**context, "kind": kind}}).get("text")
        if not isinstance(out, str) or not out.strip():
            raise ProviderError("corrector returned empty text", retryable=False)
        return out.strip()

"""Sentence embeddings for triplet text and cosine similarity matrices.

Three interchangeable providers are available:

``hashed``
    Deterministic hashed character-trigram / word features.  Needs no
    model or network and is what the test-suite runs on.
``precomputed``
    Vectors read from a JSON Lines file of ``{"text": ..., "vector": [...]}``.
``remote``
    An HTTP service answering ``POST /embed`` with ``{"texts": [...]}``.

Every provider caches vectors keyed by the exact sentence string.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import threading
import time
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (DimensionMismatch, FileUnreadable, MissingEmbedding, ProviderUnavailable,
                     SchemaError)
from .triplets import Triplet, triplet_to_sentence

log = logging.getLogger(__name__)

NORM_EPS = 1e-12


class EmbeddingProvider:
    """Base class.  Subclasses implement :meth:`_embed_uncached`."""

    kind = "abstract"

    def __init__(self, dimension: int | None = None):
        self.dimension = dimension
        self._cache: dict[str, np.ndarray] = {}

    def _embed_uncached(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return an ``(len(texts), dimension)`` float array, order preserved."""
        texts = list(texts)
        missing = list(dict.fromkeys(t for t in texts if t not in self._cache))
        if missing:
            vectors = np.asarray(self._embed_uncached(missing), dtype=np.float64)
            if vectors.ndim != 2 or vectors.shape[0] != len(missing):
                raise DimensionMismatch(
                    f"{self.kind} provider returned shape {vectors.shape} for {len(missing)} texts")
            self._check_dimension(vectors.shape[1])
            if not np.all(np.isfinite(vectors)):
                raise SchemaError(f"{self.kind} provider returned non-finite values")
            for text, vec in zip(missing, vectors):
                vec.setflags(write=False)
                self._cache[text] = vec
        if not texts:
            return np.zeros((0, self.dimension or 0))
        return np.stack([self._cache[t] for t in texts])

    def _check_dimension(self, dim: int) -> None:
        if self.dimension is None:
            self.dimension = dim
        elif dim != self.dimension:
            raise DimensionMismatch(f"expected dimension {self.dimension}, got {dim}")

    def describe(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state


def embed_batch(texts: Sequence[str], provider: EmbeddingProvider) -> np.ndarray:
    return provider.embed(texts)


# -- hashed fallback ---------------------------------------------------------

def _features(text: str) -> Iterable[str]:
    padded = f" {text} "
    for i in range(len(padded) - 2):
        yield "c:" + padded[i:i + 3]
    for word in text.split(" "):
        yield "w:" + word


def hashed_ngram_embed(text: str, dim: int = 256, seed: int = 0) -> np.ndarray:
    """Unit-norm signed feature hash of character 3-grams and words.

    Empty input (or features cancelling exactly) maps to the basis vector e0.
    """
    if dim < 8:
        raise ValueError("dim must be >= 8")
    text = " ".join(text.split())
    key = seed.to_bytes(8, "little", signed=False)
    vec = np.zeros(dim)
    if text:
        for feat in _features(text):
            h = int.from_bytes(hashlib.blake2b(feat.encode("utf-8"), digest_size=8, key=key).digest(),
                               "little")
            vec[h % dim] += 1.0 if (h >> 63) & 1 else -1.0
    norm = math.sqrt(float(vec @ vec))
    if norm < NORM_EPS:
        vec[:] = 0.0
        vec[0] = 1.0
        return vec
    return vec / norm


class HashedNgramProvider(EmbeddingProvider):
    kind = "hashed-fallback"

    def __init__(self, dimension: int = 256, seed: int = 0):
        if dimension < 8:
            raise ValueError("dimension must be >= 8")
        super().__init__(dimension)
        self.seed = seed

    def _embed_uncached(self, texts):
        return np.stack([hashed_ngram_embed(t, self.dimension, self.seed) for t in texts])

    def describe(self):
        return {"kind": self.kind, "dimension": self.dimension, "seed": self.seed}


# -- precomputed file --------------------------------------------------------

def load_embedding_file(path) -> dict[str, np.ndarray]:
    """Read a JSONL embedding table, rejecting conflicting duplicates."""
    table: dict[str, np.ndarray] = {}
    dim = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                text = obj["text"]
                vector = np.asarray(obj["vector"], dtype=np.float64)
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad embedding record ({exc})") from exc
            if not isinstance(text, str) or vector.ndim != 1 or vector.size == 0:
                raise SchemaError(f"{path}:{lineno}: bad embedding record")
            if not np.all(np.isfinite(vector)):
                raise SchemaError(f"{path}:{lineno}: non-finite vector entries")
            if dim is None:
                dim = vector.size
            elif vector.size != dim:
                raise DimensionMismatch(f"{path}:{lineno}: dimension {vector.size}, expected {dim}")
            if text in table and not np.array_equal(table[text], vector):
                raise SchemaError(f"{path}:{lineno}: duplicate text {text!r} with a different vector")
            table[text] = vector
    return table


class PrecomputedProvider(EmbeddingProvider):
    kind = "precomputed-file"

    def __init__(self, path):
        self.path = str(path)
        self.table = load_embedding_file(path)
        dim = next((v.size for v in self.table.values()), None)
        super().__init__(dim)

    def _embed_uncached(self, texts):
        missing = [t for t in texts if t not in self.table]
        if missing:
            raise MissingEmbedding(f"no vector for {missing[0]!r} in {self.path}"
                                   + (f" (+{len(missing) - 1} more)" if len(missing) > 1 else ""))
        return np.stack([self.table[t] for t in texts])

    def describe(self):
        return {"kind": self.kind, "dimension": self.dimension, "path": Path(self.path).name}


# -- remote service ----------------------------------------------------------

class RemoteProvider(EmbeddingProvider):
    """Client for an ``/embed`` HTTP endpoint.

    A request is attempted once and then retried ``retries`` times with
    exponential backoff starting at ``backoff`` seconds.
    """

    kind = "remote-service"

    def __init__(self, endpoint: str, *, retries: int = 3, backoff: float = 0.1,
                 timeout: float = 30.0, batch_size: int = 256, dimension: int | None = None):
        if retries < 0:
            raise ValueError("retries must be >= 0")
        super().__init__(dimension)
        endpoint = endpoint.rstrip("/")
        self.url = endpoint if endpoint.endswith("/embed") else endpoint + "/embed"
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.batch_size = batch_size
        self._session = None
        self._lock = threading.Lock()

    def __getstate__(self):
        state = super().__getstate__()
        state["_session"] = None
        state["_lock"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def _post(self, texts: list[str]) -> np.ndarray:
        import requests

        last_error = "no attempt made"
        attempts = 0
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            attempts += 1
            try:
                with self._lock:
                    if self._session is None:
                        self._session = requests.Session()
                    resp = self._session.post(self.url, json={"texts": texts}, timeout=self.timeout)
                if resp.status_code != 200:
                    last_error = f"HTTP {resp.status_code}"
                    continue
                body = resp.json()
                vectors = np.asarray(body["vectors"], dtype=np.float64)
                dim = int(body["dimension"])
                if vectors.shape != (len(texts), dim):
                    last_error = f"malformed body: vectors shape {vectors.shape}, dimension {dim}"
                    continue
                return vectors
            except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            log.debug("embed request to %s failed (attempt %d): %s", self.url, attempts, last_error)
        raise ProviderUnavailable(
            f"{self.url} unavailable after {self.retries} retries ({last_error})", attempts=attempts)

    def _embed_uncached(self, texts):
        chunks = [self._post(texts[i:i + self.batch_size])
                  for i in range(0, len(texts), self.batch_size)]
        return np.concatenate(chunks) if chunks else np.zeros((0, self.dimension or 0))

    def describe(self):
        return {"kind": self.kind, "dimension": self.dimension, "endpoint": self.url}


def make_provider(kind: str, *, dimension: int = 256, seed: int = 0, embeddings_file=None,
                  endpoint: str | None = None, retries: int = 3, backoff: float = 0.1,
                  timeout: float = 30.0) -> EmbeddingProvider:
    kind = {"hashed": "hashed-fallback", "precomputed": "precomputed-file",
            "remote": "remote-service"}.get(kind, kind)
    if kind == "hashed-fallback":
        return HashedNgramProvider(dimension, seed)
    if kind == "precomputed-file":
        if not embeddings_file:
            raise ValueError("precomputed provider needs an embeddings file")
        return PrecomputedProvider(embeddings_file)
    if kind == "remote-service":
        if not endpoint:
            raise ValueError("remote provider needs an endpoint")
        return RemoteProvider(endpoint, retries=retries, backoff=backoff, timeout=timeout)
    raise ValueError(f"unknown provider kind {kind!r}")


# -- similarity --------------------------------------------------------------

def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape} vs {b.shape}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na < NORM_EPS or nb < NORM_EPS:
        return 0.0
    return min(1.0, max(-1.0, float(a @ b) / (na * nb)))


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    out = np.zeros_like(m)
    ok = norms >= NORM_EPS
    out[ok] = m[ok] / norms[ok, None]
    return out


def build_similarity_matrix(preds: Sequence[Triplet], gts: Sequence[Triplet],
                            provider: EmbeddingProvider, template: str | None = None) -> np.ndarray:
    """Cosine similarity of every prediction (rows) to every ground truth (cols)."""
    pred_text = [triplet_to_sentence(t, template) for t in preds]
    gt_text = [triplet_to_sentence(t, template) for t in gts]
    if not pred_text or not gt_text:
        return np.zeros((len(pred_text), len(gt_text)))
    unique = list(dict.fromkeys(pred_text + gt_text))
    vectors = _unit_rows(provider.embed(unique))
    index = {text: i for i, text in enumerate(unique)}
    p = vectors[[index[t] for t in pred_text]]
    g = vectors[[index[t] for t in gt_text]]
    return np.clip(p @ g.T, -1.0, 1.0)

"""Embedding providers and a flat, exact-scan vector index.

The offline embedder is a seeded feature-hashing scheme over lowercased
word n-grams, so identical text always embeds to the identical vector with
no network dependency. The remote client speaks a minimal POST contract
for deployments that want a hosted embedding model instead. Either way the
index is a flat list scanned exhaustively with cosine similarity; corpus
sizes here never justify an approximate structure.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Protocol, Sequence

import numpy as np

from .chunking import Chunk
from .jsonl import write_json_atomic
from .models import QueryType

logger = logging.getLogger(__name__)

OFFLINE_DIMENSION = 256
REMOTE_DIMENSION = 3072


class IndexCorruptionError(Exception):
    pass


class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[tuple[float, ...]]: ...


_WORD = r"[a-z0-9]+"
import re as _re
_WORD_RE = _re.compile(_WORD)


@dataclass
class HashingEmbedder:
    """Deterministic local embedder: signed feature hashing of word n-grams.

    Tokens are lowercased word runs; features are unigrams and bigrams. Each
    feature is hashed with a seeded BLAKE2b digest to pick a bucket and a
    sign, and the accumulated vector is L2-normalized. All-empty text maps
    to the zero vector.
    """

    dimension: int = OFFLINE_DIMENSION
    seed: int = 2024
    max_ngram: int = 2

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")
        self._seed_bytes = self.seed.to_bytes(8, "little", signed=False)

    def _features(self, text: str) -> Iterable[str]:
        words = _WORD_RE.findall(text.lower())
        for n in range(1, self.max_ngram + 1):
            for i in range(len(words) - n + 1):
                yield " ".join(words[i:i + n])

    def embed_one(self, text: str) -> tuple[float, ...]:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for feature in self._features(text):
            digest = hashlib.blake2b(
                feature.encode("utf-8"), digest_size=8, key=self._seed_bytes
            ).digest()
            h = int.from_bytes(digest, "little")
            bucket = (h >> 1) % self.dimension
            sign = 1.0 if h & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return tuple(float(v) for v in vec)

    def embed(self, texts: Sequence[str]) -> list[tuple[float, ...]]:
        return [self.embed_one(t) for t in texts]


@dataclass
class RemoteEmbedder:
    """Client for a hosted embedding endpoint.

    POSTs ``{"model": ..., "input": [texts]}`` to ``{base_url}/embeddings``
    and expects ``{"embeddings": [[...], ...]}`` in response order. Retries
    transport failures and 5xx responses with exponential backoff.
    """

    base_url: str
    model: str = "text-embedding-3-large"
    dimension: int = REMOTE_DIMENSION
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 0.5
    session: Any = None

    def __post_init__(self) -> None:
        if self.session is None:
            import requests

            self.session = requests.Session()

    def embed(self, texts: Sequence[str]) -> list[tuple[float, ...]]:
        payload = {"model": self.model, "input": list(texts)}
        url = self.base_url.rstrip("/") + "/embeddings"
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self.session.post(url, json=payload, timeout=self.timeout_s)
                if response.status_code >= 500:
                    raise ConnectionError(f"server error {response.status_code}")
                response.raise_for_status()
                data = response.json()
                vectors = [tuple(float(v) for v in row) for row in data["embeddings"]]
                if len(vectors) != len(texts):
                    raise ValueError(
                        f"embedding count mismatch: sent {len(texts)}, got {len(vectors)}"
                    )
                for row in vectors:
                    if len(row) != self.dimension:
                        raise ValueError(
                            f"expected dimension {self.dimension}, got {len(row)}"
                        )
                return vectors
            except (ConnectionError, TimeoutError, OSError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    delay = self.backoff_s * (2 ** attempt)
                    logger.warning("embedding request failed (%s); retrying in %.1fs",
                                   exc, delay)
                    time.sleep(delay)
        raise ConnectionError(f"embedding endpoint unreachable: {last_error}")


class VectorIndex:
    """Flat in-memory index over embedded chunks with checksummed persistence."""

    def __init__(self, dimension: int) -> None:
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._chunks: dict[str, Chunk] = {}

    def __len__(self) -> int:
        return len(self._chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._chunks

    def get(self, chunk_id: str) -> Optional[Chunk]:
        return self._chunks.get(chunk_id)

    def chunks(self) -> list[Chunk]:
        return [self._chunks[cid] for cid in sorted(self._chunks)]

    def add(self, chunks: Iterable[Chunk]) -> None:
        for chunk in chunks:
            if chunk.embedding is None:
                raise ValueError(f"chunk {chunk.chunk_id} has no embedding")
            if len(chunk.embedding) != self.dimension:
                raise ValueError(
                    f"chunk {chunk.chunk_id}: dimension {len(chunk.embedding)} != "
                    f"index dimension {self.dimension}"
                )
            if chunk.chunk_id in self._chunks:
                logger.warning("replacing existing chunk %s", chunk.chunk_id)
            self._chunks[chunk.chunk_id] = chunk

    def search(self, query_vector: Sequence[float], k: int,
               metadata_filter: Optional[dict[str, str]] = None) -> list[tuple[Chunk, float]]:
        """Exact cosine scan over chunks passing the metadata filter.

        Returns up to k (chunk, score) pairs ordered by descending score,
        ties broken by ascending chunk_id. Fewer than k matches returns
        all of them; no padding.
        """
        if k <= 0:
            raise ValueError("k must be positive")
        query = np.asarray(query_vector, dtype=np.float64)
        if query.shape != (self.dimension,):
            raise ValueError(f"query dimension {query.shape} != ({self.dimension},)")

        candidates = [
            c for c in self._chunks.values()
            if _passes_filter(c, metadata_filter)
        ]
        if not candidates:
            return []
        matrix = np.asarray([c.embedding for c in candidates], dtype=np.float64)
        qn = float(np.linalg.norm(query))
        norms = np.linalg.norm(matrix, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = matrix @ query
            denom = norms * qn
            scores = np.where(denom > 0.0, scores / np.where(denom == 0.0, 1.0, denom), 0.0)
        ranked = sorted(
            zip(candidates, scores.tolist()),
            key=lambda pair: (-pair[1], pair[0].chunk_id),
        )
        return [(c, float(s)) for c, s in ranked[:k]]

    # --- persistence ---

    def _payload(self) -> dict[str, Any]:
        return {
            "dimension": self.dimension,
            "chunks": [c.to_dict() for c in self.chunks()],
        }

    @staticmethod
    def _checksum(payload: dict[str, Any]) -> str:
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def save(self, path: str) -> None:
        payload = self._payload()
        payload["checksum"] = self._checksum(
            {"dimension": payload["dimension"], "chunks": payload["chunks"]}
        )
        write_json_atomic(path, payload)

    @classmethod
    def load(cls, path: str) -> "VectorIndex":
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        expected = payload.get("checksum")
        body = {"dimension": payload["dimension"], "chunks": payload["chunks"]}
        actual = cls._checksum(body)
        if expected != actual:
            raise IndexCorruptionError(f"{path}: checksum mismatch")
        index = cls(int(payload["dimension"]))
        index.add(Chunk.from_dict(c) for c in payload["chunks"])
        return index


def _passes_filter(chunk: Chunk, metadata_filter: Optional[dict[str, str]]) -> bool:
    if not metadata_filter:
        return True
    meta = chunk.metadata.to_dict()
    for key, value in metadata_filter.items():
        if key not in meta:
            raise ValueError(f"unknown metadata filter key: {key}")
        if meta[key] != value:
            return False
    return True


def retrieve(index: VectorIndex, embedder: EmbeddingProvider, query_text: str, k: int,
             metadata_filter: Optional[dict[str, str]] = None) -> list[tuple[Chunk, float]]:
    vector = embedder.embed([query_text])[0]
    return index.search(vector, k, metadata_filter)


def route_category(query_type: QueryType | str,
                   anchor_variables: Sequence[str]) -> dict[str, str]:
    """Pick the metadata filter for grounding retrieval.

    Multimodal queries touching any IMU channel restrict to physiological
    sensor data; load- or adaptation-centric queries restrict to unstructured
    coaching sources; everything else searches unfiltered.
    """
    qt = QueryType(query_type)
    vars_set = set(anchor_variables)
    if qt is QueryType.MULTIMODAL and any(v.startswith("imu") for v in vars_set):
        return {"data_category": "Physiological"}
    if vars_set & {"training_load_au", "adaptation_pct"}:
        return {"source_type": "Unstructured"}
    return {}

"""Retrieval of the three inspiration types: semantic, KG, and citation neighbors.

Semantic neighbors come from an exact-scan index over training instances;
KG neighbors are one-hop lookups keyed by the seed term; citation neighbors
are titles of papers cited by the source document, filtered by year and
ranked by similarity to the query.  The corpus scale permits exact scans,
so no approximate nearest-neighbor structure is used.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .corpus import TaskInstance, normalize_text
from .kgraph import KnowledgeGraph, one_hop_neighbors
from .prompting import seed_prompt

SEMANTIC_CAP = 20
CITATION_CAP = 5


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Text-to-unit-vector contract; same text must embed identically."""

    name: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingStubProvider:
    """Deterministic pseudo-random unit vectors keyed by normalized text.

    Contract-compliant stand-in for a real encoder in tests: embeddings are
    stable across sessions and unit-normalized.
    """

    def __init__(self, dimension: int = 32, name: str = "hashing-stub"):
        self.name = name
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(normalize_text(text).encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dimension)
        return vec / np.linalg.norm(vec)


class SentenceTransformerProvider:
    """Adapter for a sentence-transformers encoder (e.g. all-mpnet-base-v2)."""

    def __init__(self, model_name: str = "sentence-transformers/all-mpnet-base-v2"):
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_name)
        self.name = model_name
        self.dimension = self._model.get_sentence_embedding_dimension()

    def embed(self, text: str) -> np.ndarray:
        vec = self._model.encode(text, normalize_embeddings=True)
        return np.asarray(vec, dtype=np.float64)


@dataclass(frozen=True)
class SemanticEntry:
    query_text: str
    target_entity: str
    vector: np.ndarray


@dataclass(frozen=True)
class SemanticIndex:
    entries: tuple[SemanticEntry, ...]
    built_from: str
    provider_name: str
    dimension: int

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class NeighborSet:
    semantic: tuple[str, ...]
    kg: tuple[str, ...]
    citation: tuple[str, ...]
    caps: tuple[int, int] = (SEMANTIC_CAP, CITATION_CAP)

    def to_dict(self) -> dict:
        return {
            "semantic": list(self.semantic),
            "kg": list(self.kg),
            "citation": list(self.citation),
            "caps": {"semantic": self.caps[0], "citation": self.caps[1]},
        }


class ConfigurationError(Exception):
    pass


class LookupError_(KeyError):
    pass


def build_query(instance: TaskInstance) -> str:
    """Seed prompt followed by the background context."""
    prompt = seed_prompt(instance.seed_term, instance.target_type, instance.direction)
    return f"{prompt} Context: {instance.background}"


def build_semantic_index(
    train_instances, provider: EmbeddingProvider, built_from: str = "train"
) -> SemanticIndex:
    """One entry per training instance; duplicates of the query text allowed."""
    entries = []
    for inst in train_instances:
        q = build_query(inst)
        vec = provider.embed(q)
        if vec.shape != (provider.dimension,):
            raise ConfigurationError(
                f"provider {provider.name} returned shape {vec.shape}, "
                f"declared dimension {provider.dimension}"
            )
        target = inst.target_node if inst.target_node is not None else inst.target
        entries.append(SemanticEntry(q, target, vec))
    return SemanticIndex(
        entries=tuple(entries),
        built_from=built_from,
        provider_name=provider.name,
        dimension=provider.dimension,
    )


def _top_k(scored, k: int):
    """Top-k (item, similarity) by similarity desc, ties lexicographic on item key."""
    ranked = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    return ranked[: max(k, 0)]


def semantic_neighbors(
    index: SemanticIndex, q: str, k: int, provider: EmbeddingProvider
):
    """Top-k index entries by cosine similarity to q.

    Returns (query_text, target_entity, similarity) triples, descending
    similarity, ties broken lexicographically by the indexed query text.
    """
    if k <= 0 or not index.entries:
        return []
    qvec = provider.embed(q)
    sims = [float(np.dot(qvec, e.vector)) for e in index.entries]
    keyed = sorted(
        zip(index.entries, sims), key=lambda pair: (-pair[1], pair[0].query_text)
    )
    return [(e.query_text, e.target_entity, s) for e, s in keyed[:k]]


def citation_neighbors(
    records_by_id: dict,
    doc_id: str,
    q: str,
    k: int,
    cutoff_year: int,
    provider: EmbeddingProvider,
) -> list[str]:
    """Titles of papers cited by doc_id, dated before cutoff, ranked by cosine to q."""
    if doc_id not in records_by_id:
        raise LookupError_(f"unknown document {doc_id}")
    doc = records_by_id[doc_id]
    candidates = []
    for cited_id in doc.citations:
        cited = records_by_id.get(cited_id)
        if cited is None or cited.year >= cutoff_year:
            continue
        candidates.append(cited.title)
    if not candidates:
        return []
    qvec = provider.embed(q)
    scored = [(title, float(np.dot(qvec, provider.embed(title)))) for title in candidates]
    return [title for title, _ in _top_k(scored, k)]


def _dedup(items) -> tuple[str, ...]:
    return tuple(dict.fromkeys(items))


def retrieve_all(
    instance: TaskInstance,
    index: SemanticIndex | None,
    kg: KnowledgeGraph | None,
    records_by_id: dict | None,
    provider: EmbeddingProvider,
    k_semantic: int = SEMANTIC_CAP,
    k_citation: int = CITATION_CAP,
    cutoff_year: int | None = None,
) -> NeighborSet:
    """Fetch all three neighbor types; missing graphs yield empty components."""
    q = build_query(instance)
    semantic: tuple[str, ...] = ()
    if index is not None:
        hits = semantic_neighbors(index, q, k_semantic, provider)
        semantic = _dedup(target for _, target, _ in hits)[:k_semantic]
    kg_nbrs: tuple[str, ...] = ()
    if kg is not None:
        kg_nbrs = tuple(one_hop_neighbors(kg, instance.seed_term))
    citation: tuple[str, ...] = ()
    if records_by_id is not None and instance.paper_id in records_by_id:
        cutoff = cutoff_year if cutoff_year is not None else instance.year
        citation = _dedup(
            citation_neighbors(records_by_id, instance.paper_id, q, k_citation, cutoff, provider)
        )[:k_citation]
    return NeighborSet(semantic=semantic, kg=kg_nbrs, citation=citation,
                       caps=(k_semantic, k_citation))


# ---------------------------------------------------------------------------
# Embedding cache: header (provider name, dimension), then fixed-size records
# of (sha256 text hash, little-endian float32 vector).
# ---------------------------------------------------------------------------

_CACHE_MAGIC = b"EMBCACHE1\n"


class EmbeddingCache:
    """Persistent embedding store keyed by (provider name, text hash)."""

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider
        self._store: dict[bytes, np.ndarray] = {}

    @staticmethod
    def _key(text: str) -> bytes:
        return hashlib.sha256(text.encode("utf-8")).digest()

    def embed(self, text: str) -> np.ndarray:
        key = self._key(text)
        vec = self._store.get(key)
        if vec is None:
            vec = self.provider.embed(text)
            self._store[key] = vec
        return vec

    @property
    def name(self) -> str:
        return self.provider.name

    @property
    def dimension(self) -> int:
        return self.provider.dimension

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_CACHE_MAGIC)
            name = self.provider.name.encode("utf-8")
            fh.write(struct.pack("<HI", len(name), self.provider.dimension))
            fh.write(name)
            for key, vec in self._store.items():
                fh.write(key)
                fh.write(np.asarray(vec, dtype="<f4").tobytes())

    def load(self, path) -> None:
        """Load cached vectors; a cache from a different provider is discarded."""
        with open(path, "rb") as fh:
            if fh.read(len(_CACHE_MAGIC)) != _CACHE_MAGIC:
                raise ValueError(f"{path}: not an embedding cache file")
            name_len, dimension = struct.unpack("<HI", fh.read(6))
            name = fh.read(name_len).decode("utf-8")
            if name != self.provider.name or dimension != self.provider.dimension:
                return
            record = 32 + 4 * dimension
            while True:
                chunk = fh.read(record)
                if not chunk:
                    break
                if len(chunk) != record:
                    raise ValueError(f"{path}: truncated cache record")
                key = chunk[:32]
                vec = np.frombuffer(chunk[32:], dtype="<f4").astype(np.float64)
                self._store[key] = vec

"""Cosine similarity, max-pooled document vectors, and saliency maps.

All math runs in float64 regardless of the float32 wire format.  Pooling
operates on raw embeddings; normalization happens only inside the cosine.
Everything here is a pure function over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, EmptyGrid, ZeroNormVector
from .types import PatchGrid, QueryEmbedding, SaliencyMap

__all__ = [
    "DocScore",
    "cosine",
    "max_pool_global",
    "score_document",
    "saliency_map",
]


@dataclass(frozen=True, order=True)
class DocScore:
    """Cosine similarity between a query and one document's global vector."""

    doc_id: str
    score: float


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity ``a.b / (|a| |b|)`` of two same-dimension vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DimensionMismatch(f"cosine needs two equal-length vectors, got {a.shape} and {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormVector("cosine undefined for zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def max_pool_global(grid: PatchGrid) -> np.ndarray:
    """Element-wise maximum across all patch embeddings of a document."""
    emb = grid.embeddings
    if emb.ndim != 2 or emb.shape[0] == 0:
        raise EmptyGrid(f"document {grid.doc_id!r} has no patch embeddings")
    return emb.max(axis=0)


def score_document(q: QueryEmbedding, grid: PatchGrid) -> DocScore:
    """Cosine between the query vector and the document's pooled vector."""
    pooled = max_pool_global(grid)
    return DocScore(doc_id=grid.doc_id, score=cosine(q.vector, pooled))


def saliency_map(q: QueryEmbedding, grid: PatchGrid) -> SaliencyMap:
    """Per-patch cosine scores between the query and every patch embedding.

    Patch order (and therefore grid layout) is preserved.  A zero-norm
    patch vector signals an ingestion bug and is rejected with its index.
    """
    emb = grid.embeddings
    if emb.ndim != 2 or emb.shape[0] == 0:
        raise EmptyGrid(f"document {grid.doc_id!r} has no patch embeddings")
    qv = np.asarray(q.vector, dtype=np.float64)
    if qv.shape[0] != emb.shape[1]:
        raise DimensionMismatch(
            f"query dimension {qv.shape[0]} != patch dimension {emb.shape[1]}")
    qn = float(np.linalg.norm(qv))
    if qn == 0.0:
        raise ZeroNormVector("query vector has zero norm")
    norms = np.linalg.norm(emb, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormVector(f"patch {int(zero[0])} of document {grid.doc_id!r} has zero norm")
    scores = (emb @ qv) / (norms * qn)
    return SaliencyMap(doc_id=grid.doc_id, rows=grid.rows, cols=grid.cols, scores=scores)

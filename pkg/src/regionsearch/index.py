"""Corpus container and the two-stage retrieval pipeline.

Stage one ranks documents by cosine between the query and each document's
max-pooled global vector (exact linear scan, no approximation).  Stage two
runs region proposal on each of the top-k documents and accounts for the
visual tokens a downstream consumer would spend on either the full pages
or just the proposed boxes.

Ordering is deterministic everywhere: scores sort descending with ties
broken by ``doc_id`` ascending.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, EmptyCorpus, ValidationFailure
from .regions import RegionResult, propose_regions
from .similarity import DocScore, cosine, max_pool_global
from .types import HyperParams, PatchGrid, QueryEmbedding, validate_patch_grid

__all__ = [
    "Corpus",
    "RetrievalResult",
    "retrieve_topk",
    "retrieve_regions",
    "token_count",
]

DEFAULT_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass
class Corpus:
    """All ingested documents plus manifest metadata.

    Build it up with :meth:`ingest`, then treat it as read-only while
    serving queries; the pooled-vector cache assumes that split.
    """

    docs: dict[str, PatchGrid] = field(default_factory=dict)
    created: str = DEFAULT_TIMESTAMP
    _pooled: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return len(self.docs)

    @property
    def dim(self) -> int | None:
        for grid in self.docs.values():
            return grid.dim
        return None

    def ingest(self, grid: PatchGrid) -> "Corpus":
        """Validate and add a document; same doc_id replaces the old grid."""
        validate_patch_grid(grid)
        d = self.dim
        if d is not None and grid.dim != d:
            raise DimensionMismatch(
                f"document {grid.doc_id!r} has dimension {grid.dim}, corpus has {d}")
        self.docs[grid.doc_id] = grid
        self._pooled.pop(grid.doc_id, None)
        return self

    def pooled(self, doc_id: str) -> np.ndarray:
        if doc_id not in self._pooled:
            self._pooled[doc_id] = max_pool_global(self.docs[doc_id])
        return self._pooled[doc_id]


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked documents, their proposed regions, and the token accounting."""

    query_id: str
    ranked_docs: list[DocScore]
    regions: dict[str, list[RegionResult]]
    token_report: dict


def retrieve_topk(corpus: Corpus, q: QueryEmbedding, k: int) -> list[DocScore]:
    """The k best documents by pooled-vector cosine; all of them if k > M."""
    if k < 1:
        raise ValidationFailure(f"k must be >= 1, got {k}")
    if corpus.size == 0:
        raise EmptyCorpus("cannot retrieve from an empty corpus")
    scores = [DocScore(doc_id=doc_id, score=cosine(q.vector, corpus.pooled(doc_id)))
              for doc_id in corpus.docs]
    scores.sort(key=lambda ds: (-ds.score, ds.doc_id))
    return scores[:k]


def token_count(box_w: int, box_h: int, patch_w: int, patch_h: int,
                pixel_budget: int) -> int:
    """Visual tokens spent on a (box_w x box_h) crop under an area budget.

    Crops above the budget are shrunk isotropically to fit (floored, at
    least one pixel per side); tokens are then the number of patch tiles
    covering the resized crop.
    """
    if min(box_w, box_h, patch_w, patch_h, pixel_budget) < 1:
        raise ValidationFailure("token_count arguments must all be positive")
    w, h = box_w, box_h
    if w * h > pixel_budget:
        scale = math.sqrt(pixel_budget / (w * h))
        w = max(1, math.floor(w * scale))
        h = max(1, math.floor(h * scale))
    return math.ceil(w / patch_w) * math.ceil(h / patch_h)


def _doc_token_report(grid: PatchGrid, regions: list[RegionResult],
                      pixel_budget: int) -> dict:
    image = token_count(grid.img_w, grid.img_h, grid.patch_w, grid.patch_h, pixel_budget)
    bbox = sum(token_count(r.bbox.width, r.bbox.height, grid.patch_w, grid.patch_h,
                           pixel_budget) for r in regions)
    return {"image": image, "bbox": bbox}


def retrieve_regions(corpus: Corpus, q: QueryEmbedding, k: int, hp: HyperParams,
                     region_cap: int | None = None) -> RetrievalResult:
    """Stage-two retrieval: top-k documents, then regions for each.

    All regions from every top-k document are kept.  ``region_cap``
    optionally keeps only the best N regions across the whole result,
    ranked by peak saliency (ties: doc_id ascending, then proposal order).
    """
    hp.require_eta()
    ranked = retrieve_topk(corpus, q, k)
    regions: dict[str, list[RegionResult]] = {}
    for ds in ranked:
        regions[ds.doc_id] = propose_regions(q, corpus.docs[ds.doc_id], hp)

    if region_cap is not None:
        if region_cap < 0:
            raise ValidationFailure(f"region cap must be >= 0, got {region_cap}")
        flat = [(-reg.peak_score, doc_id, i)
                for doc_id, regs in regions.items()
                for i, reg in enumerate(regs)]
        keep = set((doc_id, i) for _, doc_id, i in sorted(flat)[:region_cap])
        regions = {doc_id: [reg for i, reg in enumerate(regs) if (doc_id, i) in keep]
                   for doc_id, regs in regions.items()}

    per_doc = {ds.doc_id: _doc_token_report(corpus.docs[ds.doc_id],
                                            regions[ds.doc_id], hp.pixel_budget)
               for ds in ranked}
    token_report = {
        "image": sum(rep["image"] for rep in per_doc.values()),
        "bbox": sum(rep["bbox"] for rep in per_doc.values()),
        "per_doc": per_doc,
    }
    return RetrievalResult(query_id=q.query_id, ranked_docs=ranked,
                           regions=regions, token_report=token_report)

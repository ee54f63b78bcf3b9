"""scikit-learn style estimator wrapping the retrieval pipeline.

``RegionSearcher`` follows the fit/predict/transform protocol so the
engine composes with pipelines and parameter search: ``fit`` ingests the
document grids, ``predict`` returns the best document id per query, and
``transform`` returns the full region-level retrieval result.  Parameter
handling (``get_params``/``set_params``) comes from ``BaseEstimator``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .index import Corpus, RetrievalResult, retrieve_regions, retrieve_topk
from .similarity import DocScore
from .types import HyperParams, PatchGrid, QueryEmbedding, validate_hyperparams

__all__ = ["RegionSearcher"]


class RegionSearcher(BaseEstimator):
    """Region-level retrieval as an estimator.

    Parameters
    ----------
    k : number of documents to retrieve per query.
    eta : saliency threshold for region proposal (inclusive).
    radius : Chebyshev neighborhood radius for region merging.
    region_cap : optional global cap on returned regions per query.
    pixel_budget : pixel-area cap used for visual-token accounting.
    """

    def __init__(self, k: int = 4, eta: float = 0.0, radius: int = 1,
                 region_cap: int | None = None, pixel_budget: int = 512 * 512):
        self.k = k
        self.eta = eta
        self.radius = radius
        self.region_cap = region_cap
        self.pixel_budget = pixel_budget

    def _hp(self) -> HyperParams:
        hp = HyperParams(eta=self.eta, radius=self.radius,
                         pixel_budget=self.pixel_budget)
        validate_hyperparams(hp, require_eta=True)
        return hp

    def fit(self, X: Iterable[PatchGrid] | Corpus, y=None) -> "RegionSearcher":
        """Ingest the document collection; X is PatchGrids or a Corpus."""
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        self._hp()
        if isinstance(X, Corpus):
            corpus = X
        else:
            corpus = Corpus()
            for grid in X:
                corpus.ingest(grid)
        if corpus.size == 0:
            raise ValueError("cannot fit on an empty document collection")
        self.corpus_ = corpus
        self.n_docs_ = corpus.size
        self.dim_ = corpus.dim
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "corpus_"):
            raise NotFittedError("RegionSearcher must be fitted before querying")

    def search(self, q: QueryEmbedding, k: int | None = None) -> list[DocScore]:
        """Ranked documents for one query."""
        self._check_fitted()
        return retrieve_topk(self.corpus_, q, k if k is not None else self.k)

    def predict(self, X: Sequence[QueryEmbedding]) -> np.ndarray:
        """Best-scoring document id for each query."""
        self._check_fitted()
        return np.array([self.search(q, k=1)[0].doc_id for q in X], dtype=object)

    def transform(self, X: Sequence[QueryEmbedding]) -> list[RetrievalResult]:
        """Full region-level retrieval result for each query."""
        self._check_fitted()
        hp = self._hp()
        return [retrieve_regions(self.corpus_, q, self.k, hp,
                                 region_cap=self.region_cap) for q in X]

    def fit_transform(self, X, y=None, queries: Sequence[QueryEmbedding] = ()):
        return self.fit(X).transform(queries)

"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from regionsearch import Mask, PatchGrid, QueryEmbedding, chebyshev


def make_grid(doc_id: str, rows: int, cols: int, emb: np.ndarray,
              patch: int = 28, img_h: int | None = None,
              img_w: int | None = None) -> PatchGrid:
    return PatchGrid(
        doc_id=doc_id, rows=rows, cols=cols, patch_h=patch, patch_w=patch,
        img_h=img_h if img_h is not None else rows * patch,
        img_w=img_w if img_w is not None else cols * patch,
        embeddings=emb)


def make_query(qid: str, vec) -> QueryEmbedding:
    return QueryEmbedding(query_id=qid, vector=np.asarray(vec, dtype=float))


def oracle_components(mask: Mask, r: int) -> set[frozenset[tuple[int, int]]]:
    """Brute-force union-find over all salient coordinate pairs.

    Independent of the BFS implementation: unions every pair within
    Chebyshev distance r and reads off the resulting partition.
    """
    coords = mask.salient_coords()
    parent = {c: c for c in coords}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            if chebyshev(coords[i], coords[j]) <= r:
                ra, rb = find(coords[i]), find(coords[j])
                if ra != rb:
                    parent[ra] = rb

    groups: dict[tuple[int, int], set] = {}
    for c in coords:
        groups.setdefault(find(c), set()).add(c)
    return {frozenset(g) for g in groups.values()}


def random_mask(rng: np.random.Generator, rows: int, cols: int,
                density: float = 0.4) -> Mask:
    return Mask(rows=rows, cols=cols, bits=rng.random(rows * cols) < density)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240815)

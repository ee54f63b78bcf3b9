"""Shared domain types and their validation helpers.

Conventions used throughout the package:

* Grids are row-major.  Flat patch index ``k`` maps to grid coordinate
  ``(row, col) = (k // cols, k % cols)``.
* In pixel space ``x`` runs along columns (width) and ``y`` along rows
  (height), origin at the top-left corner.
* Images whose sides are not multiples of the patch size keep full-size
  trailing patches; their pixel rectangles are clamped to the image.
* All arrays are held as read-only float64; the wire format is float32.

Every type is immutable after construction and safe to share across
threads.  Constructors coerce and freeze their array fields; the
``validate_*`` functions check the semantic invariants and raise a
:class:`~regionsearch.exceptions.ValidationFailure` subclass on the first
violation.  They never raise anything else, even for garbage input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    BoxOutOfBounds,
    DimensionMismatch,
    GeometryInconsistent,
    NonFiniteComponent,
    ValidationFailure,
    ZeroNormVector,
)

__all__ = [
    "PatchGrid",
    "QueryEmbedding",
    "BBox",
    "SaliencyMap",
    "Mask",
    "SupervisionSets",
    "HyperParams",
    "aggregate_token_vectors",
    "validate_patch_grid",
    "validate_query",
    "validate_bbox",
    "validate_saliency_map",
    "validate_supervision_sets",
    "validate_hyperparams",
]

SCORE_TOL = 1e-6


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def aggregate_token_vectors(tokens: np.ndarray) -> np.ndarray:
    """Collapse per-token query vectors into one vector.

    Arithmetic mean over tokens followed by L2 normalization: deterministic
    and independent of token order up to float associativity.
    """
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise DimensionMismatch("token vectors must form a nonempty (n, d) matrix")
    mean = tokens.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0 or not math.isfinite(norm):
        raise ZeroNormVector("token vectors average to a zero or non-finite vector")
    return mean / norm


@dataclass(frozen=True)
class PatchGrid:
    """A document as an (rows x cols) grid of patch embedding vectors.

    ``embeddings`` is an ``(N, d)`` matrix in row-major patch order with
    ``N == rows * cols``.  ``patch_h``/``patch_w`` give the patch size in
    pixels and ``img_h``/``img_w`` the full image extent.
    """

    doc_id: str
    rows: int
    cols: int
    patch_h: int
    patch_w: int
    img_h: int
    img_w: int
    embeddings: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "embeddings", _freeze(self.embeddings))

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[-1]) if self.embeddings.ndim == 2 else 0

    def patch_rect(self, row: int, col: int) -> tuple[int, int, int, int]:
        """Pixel rectangle of one patch, clamped to the image extent.

        Returned as ``(x1, y1, x2, y2)`` covering pixels ``[x1, x2) x [y1, y2)``.
        """
        x1 = col * self.patch_w
        y1 = row * self.patch_h
        x2 = min((col + 1) * self.patch_w, self.img_w)
        y2 = min((row + 1) * self.patch_h, self.img_h)
        return x1, y1, x2, y2

    def patch_center(self, row: int, col: int) -> tuple[float, float]:
        """Pixel center of the (clamped) rectangle a patch actually covers."""
        x1, y1, x2, y2 = self.patch_rect(row, col)
        return (x1 + x2) / 2.0, (y1 + y2) / 2.0


@dataclass(frozen=True)
class QueryEmbedding:
    """A query as one d-dimensional vector.

    When the encoder emitted several token vectors, they are kept in
    ``raw_token_vectors`` and ``vector`` must equal their arithmetic mean
    followed by L2 normalization (see :func:`aggregate_token_vectors`).
    """

    query_id: str
    vector: np.ndarray
    raw_token_vectors: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "vector", _freeze(self.vector))
        if self.raw_token_vectors is not None:
            object.__setattr__(self, "raw_token_vectors", _freeze(self.raw_token_vectors))

    @classmethod
    def from_tokens(cls, query_id: str, tokens: np.ndarray) -> "QueryEmbedding":
        tokens = np.asarray(tokens, dtype=np.float64)
        return cls(query_id=query_id, vector=aggregate_token_vectors(tokens),
                   raw_token_vectors=tokens)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[-1]) if self.vector.ndim == 1 else 0


@dataclass(frozen=True, order=True)
class BBox:
    """Pixel rectangle with top-left origin.

    Corners are produced by the grid-to-pixel mapping, so ``(x1, y1)`` is
    the first covered pixel and ``(x2, y2)`` the exclusive extent used for
    area computations: ``area = (x2 - x1) * (y2 - y1)``.
    """

    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains_point(self, x: float, y: float) -> bool:
        """Inclusive containment check on all four edges."""
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2

    def intersects(self, other: "BBox") -> bool:
        """Nonempty overlap, treating both rectangles as half-open."""
        return (self.x1 < other.x2 and other.x1 < self.x2
                and self.y1 < other.y2 and other.y1 < self.y2)

    def contains_box(self, other: "BBox") -> bool:
        return (self.x1 <= other.x1 and self.y1 <= other.y1
                and self.x2 >= other.x2 and self.y2 >= other.y2)

    def iou(self, other: "BBox") -> float:
        ix = max(0, min(self.x2, other.x2) - max(self.x1, other.x1))
        iy = max(0, min(self.y2, other.y2) - max(self.y1, other.y1))
        inter = ix * iy
        union = self.area + other.area - inter
        return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class SaliencyMap:
    """Per-patch cosine scores for one (query, document) pair."""

    doc_id: str
    rows: int
    cols: int
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scores", _freeze(self.scores))

    def score_at(self, row: int, col: int) -> float:
        return float(self.scores[row * self.cols + col])


@dataclass(frozen=True)
class Mask:
    """Binarized saliency map: one bit per patch, row-major."""

    rows: int
    cols: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def bit_at(self, row: int, col: int) -> bool:
        return bool(self.bits[row * self.cols + col])

    def salient_coords(self) -> list[tuple[int, int]]:
        """Row-major list of (row, col) coordinates of set bits."""
        return [(int(k) // self.cols, int(k) % self.cols)
                for k in np.flatnonzero(self.bits)]


@dataclass(frozen=True)
class SupervisionSets:
    """Positive / negative patch index sets for the patch-level loss.

    Indices outside both sets are abstained: they contribute nothing.
    """

    positive: frozenset[int]
    negative: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "positive", frozenset(self.positive))
        object.__setattr__(self, "negative", frozenset(self.negative))


@dataclass(frozen=True)
class HyperParams:
    """Engine hyper-parameters.

    Defaults follow the shipped configuration: softmax temperatures 0.02
    (document level) and 0.25 (patch level), loss weights alpha=1 and
    beta=0.01, pseudo-label threshold theta=0, merge radius 1 and a pixel
    budget of 512^2.  ``eta`` (the saliency binarization threshold) is
    corpus-dependent and has no sensible default, so it must be supplied
    before any region operation runs.
    """

    tau_global: float = 0.02
    tau_local: float = 0.25
    alpha: float = 1.0
    beta: float = 0.01
    theta: float = 0.0
    eta: float | None = None
    radius: int = 1
    pixel_budget: int = 512 * 512

    def require_eta(self) -> float:
        if self.eta is None:
            raise ValidationFailure("eta (saliency threshold) is required for region operations")
        return self.eta


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------


def _require(cond: bool, exc: type[ValidationFailure], msg: str) -> None:
    if not cond:
        raise exc(msg)


def _covers(n_cells: int, cell_px: int, img_px: int) -> bool:
    # Grid covers the image; only the last cell may overhang.
    return n_cells * cell_px >= img_px and (n_cells - 1) * cell_px < img_px


def validate_patch_grid(grid: PatchGrid) -> None:
    """Check every PatchGrid invariant; raise on the first violation.

    Total over arbitrary input: any structural surprise is reported as a
    ValidationFailure rather than leaking a TypeError.
    """
    try:
        _require(isinstance(grid.doc_id, str) and grid.doc_id != "",
                 ValidationFailure, "doc_id must be a nonempty string")
        for name in ("rows", "cols", "patch_h", "patch_w", "img_h", "img_w"):
            v = getattr(grid, name)
            _require(isinstance(v, int) and v >= 1, ValidationFailure,
                     f"{name} must be a positive integer, got {v!r}")
        emb = grid.embeddings
        _require(emb.ndim == 2, DimensionMismatch,
                 f"embeddings must be a 2-D matrix, got ndim={emb.ndim}")
        n, d = emb.shape
        _require(n == grid.rows * grid.cols, DimensionMismatch,
                 f"expected {grid.rows * grid.cols} embeddings, got {n}")
        _require(d >= 1, DimensionMismatch, "embedding dimension must be >= 1")
        _require(bool(np.isfinite(emb).all()), NonFiniteComponent,
                 "embeddings contain NaN or infinity")
        _require(_covers(grid.rows, grid.patch_h, grid.img_h), GeometryInconsistent,
                 f"rows={grid.rows} x patch_h={grid.patch_h} does not cover img_h={grid.img_h}")
        _require(_covers(grid.cols, grid.patch_w, grid.img_w), GeometryInconsistent,
                 f"cols={grid.cols} x patch_w={grid.patch_w} does not cover img_w={grid.img_w}")
    except ValidationFailure:
        raise
    except Exception as exc:  # malformed object, not a crash
        raise ValidationFailure(f"patch grid is structurally invalid: {exc}") from exc


def validate_query(q: QueryEmbedding) -> None:
    """Check QueryEmbedding invariants, including the aggregation contract."""
    try:
        _require(isinstance(q.query_id, str) and q.query_id != "",
                 ValidationFailure, "query_id must be a nonempty string")
        v = q.vector
        _require(v.ndim == 1 and v.shape[0] >= 1, DimensionMismatch,
                 "query vector must be 1-D and nonempty")
        _require(bool(np.isfinite(v).all()), NonFiniteComponent,
                 "query vector contains NaN or infinity")
        _require(float(np.linalg.norm(v)) > 0.0, ZeroNormVector,
                 "query vector has zero norm")
        if q.raw_token_vectors is not None:
            toks = q.raw_token_vectors
            _require(toks.ndim == 2 and toks.shape[0] >= 1, DimensionMismatch,
                     "raw token vectors must form a nonempty (n, d) matrix")
            _require(toks.shape[1] == v.shape[0], DimensionMismatch,
                     "token vectors and aggregated vector disagree on dimension")
            _require(bool(np.isfinite(toks).all()), NonFiniteComponent,
                     "token vectors contain NaN or infinity")
            expected = aggregate_token_vectors(toks)
            _require(bool(np.allclose(v, expected, rtol=0.0, atol=1e-9)),
                     ValidationFailure,
                     "aggregated vector is not the normalized mean of the token vectors")
    except ValidationFailure:
        raise
    except Exception as exc:
        raise ValidationFailure(f"query embedding is structurally invalid: {exc}") from exc


def validate_bbox(box: BBox, img_w: int, img_h: int) -> None:
    """Check that a box is well-formed and inside an (img_w x img_h) image."""
    ok = (isinstance(box.x1, int) and isinstance(box.y1, int)
          and isinstance(box.x2, int) and isinstance(box.y2, int)
          and 0 <= box.x1 < box.x2 <= img_w
          and 0 <= box.y1 < box.y2 <= img_h)
    if not ok:
        raise BoxOutOfBounds(
            f"box ({box.x1},{box.y1},{box.x2},{box.y2}) invalid for image {img_w}x{img_h}")


def validate_saliency_map(s: SaliencyMap) -> None:
    try:
        _require(isinstance(s.rows, int) and s.rows >= 1
                 and isinstance(s.cols, int) and s.cols >= 1,
                 ValidationFailure, "rows and cols must be positive integers")
        _require(s.scores.ndim == 1 and s.scores.shape[0] == s.rows * s.cols,
                 DimensionMismatch,
                 f"expected {s.rows * s.cols} scores, got {s.scores.shape}")
        _require(bool(np.isfinite(s.scores).all()), NonFiniteComponent,
                 "saliency scores contain NaN or infinity")
        lo, hi = float(s.scores.min()), float(s.scores.max())
        _require(lo >= -1.0 - SCORE_TOL and hi <= 1.0 + SCORE_TOL, ValidationFailure,
                 f"saliency scores outside [-1, 1]: range [{lo}, {hi}]")
    except ValidationFailure:
        raise
    except Exception as exc:
        raise ValidationFailure(f"saliency map is structurally invalid: {exc}") from exc


def validate_supervision_sets(sets: SupervisionSets, n_patches: int) -> None:
    overlap = sets.positive & sets.negative
    _require(not overlap, ValidationFailure,
             f"positive and negative sets overlap: {sorted(overlap)[:5]}")
    for idx in sets.positive | sets.negative:
        _require(isinstance(idx, int) and 0 <= idx < n_patches, ValidationFailure,
                 f"patch index {idx!r} outside [0, {n_patches})")


def validate_hyperparams(hp: HyperParams, require_eta: bool = False) -> None:
    """Range-check hyper-parameters.

    ``eta`` and ``theta`` are compared against saliency scores with ``>=``,
    so any finite value is legal: below -1 selects everything, above +1
    selects nothing.
    """
    try:
        _require(hp.tau_global > 0 and math.isfinite(hp.tau_global),
                 ValidationFailure, "tau_global must be positive and finite")
        _require(hp.tau_local > 0 and math.isfinite(hp.tau_local),
                 ValidationFailure, "tau_local must be positive and finite")
        _require(hp.alpha >= 0 and math.isfinite(hp.alpha),
                 ValidationFailure, "alpha must be nonnegative and finite")
        _require(hp.beta >= 0 and math.isfinite(hp.beta),
                 ValidationFailure, "beta must be nonnegative and finite")
        _require(math.isfinite(hp.theta), ValidationFailure, "theta must be finite")
        if hp.eta is not None:
            _require(math.isfinite(hp.eta), ValidationFailure, "eta must be finite")
        if require_eta:
            hp.require_eta()
        _require(isinstance(hp.radius, int) and hp.radius >= 1,
                 ValidationFailure, "radius must be a positive integer")
        _require(isinstance(hp.pixel_budget, int) and hp.pixel_budget >= 1,
                 ValidationFailure, "pixel_budget must be a positive integer")
    except ValidationFailure:
        raise
    except Exception as exc:
        raise ValidationFailure(f"hyper-parameters are structurally invalid: {exc}") from exc

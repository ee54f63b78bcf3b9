"""Reference implementation of the dual contrastive training objective.

Two losses over a batch of (query, document) pairs:

* document level: in-batch InfoNCE between each query and the max-pooled
  global vectors of all documents in the batch;
* patch level: a grouped contrast that pushes the query toward a positive
  patch set and away from a negative set, where the sets come either from
  ground-truth pixel boxes or from thresholded saliency pseudo-labels.

Both losses return analytic gradients with respect to every query vector
and every patch embedding so they can be verified against finite
differences (see :mod:`regionsearch.gradcheck`).  Gradient conventions:

* max-pooling routes each output component's gradient to the first
  argmax patch (deterministic subgradient at ties);
* label sets are treated as constants: the discrete dependence of
  pseudo-labels on the embeddings does not propagate.

All softmax computations use log-sum-exp with max subtraction; at the
shipped document-level temperature (0.02) raw logits reach +-50, which
plain ``exp`` would survive but only barely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatch,
    EmptyPositiveSet,
    ValidationFailure,
    ZeroNormVector,
)
from .similarity import max_pool_global, saliency_map
from .types import (
    BBox,
    HyperParams,
    PatchGrid,
    QueryEmbedding,
    SaliencyMap,
    SupervisionSets,
    validate_bbox,
    validate_supervision_sets,
)

__all__ = [
    "Batch",
    "GlobalGrads",
    "LocalGrads",
    "LossReport",
    "labels_from_boxes",
    "labels_from_pseudo",
    "info_nce_from_logits",
    "group_contrast_from_logits",
    "global_loss",
    "local_loss",
    "combined_loss",
]


# ---------------------------------------------------------------------------
# Label construction
# ---------------------------------------------------------------------------


def labels_from_boxes(grid: PatchGrid, boxes: list[BBox]) -> SupervisionSets:
    """Derive positive/negative patch sets from ground-truth pixel boxes.

    A patch is positive when its center lies inside any box (inclusive on
    all four edges) and negative when its pixel rectangle overlaps no box
    at all.  Patches that straddle a box edge with their center outside
    belong to neither set and are abstained from the loss.
    """
    for box in boxes:
        validate_bbox(box, grid.img_w, grid.img_h)
    positive: set[int] = set()
    negative: set[int] = set()
    for row in range(grid.rows):
        for col in range(grid.cols):
            k = row * grid.cols + col
            cx, cy = grid.patch_center(row, col)
            if any(b.contains_point(cx, cy) for b in boxes):
                positive.add(k)
                continue
            x1, y1, x2, y2 = grid.patch_rect(row, col)
            rect = BBox(x1, y1, x2, y2)
            if not any(rect.intersects(b) for b in boxes):
                negative.add(k)
    return SupervisionSets(positive=frozenset(positive), negative=frozenset(negative))


def labels_from_pseudo(s: SaliencyMap, theta: float) -> SupervisionSets:
    """Pseudo-labels from a saliency map: ``score >= theta`` is positive.

    Every patch is labeled; there is no abstention in the pseudo path.
    """
    pos = np.flatnonzero(s.scores >= theta)
    neg = np.flatnonzero(s.scores < theta)
    return SupervisionSets(positive=frozenset(int(i) for i in pos),
                           negative=frozenset(int(i) for i in neg))


# ---------------------------------------------------------------------------
# Shared numeric helpers
# ---------------------------------------------------------------------------


def _logsumexp(z: np.ndarray) -> float:
    m = float(z.max())
    return m + float(np.log(np.exp(z - m).sum()))


def info_nce_from_logits(Z: np.ndarray) -> tuple[float, np.ndarray]:
    """InfoNCE over a logit matrix: row i's positive is column i.

    Returns the batch-mean loss and ``dL/dZ``.  Shift-invariant: adding a
    constant to every logit leaves the value unchanged.
    """
    B = Z.shape[0]
    m = Z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(Z - m).sum(axis=1))
    value = float(np.mean(lse - np.diagonal(Z)))
    dZ = (np.exp(Z - lse[:, None]) - np.eye(B)) / B
    return value, dZ


def group_contrast_from_logits(z: np.ndarray, n_pos: int) -> tuple[float, np.ndarray]:
    """Grouped contrast over a logit vector whose first ``n_pos`` entries
    are the positives: ``lse(all) - lse(positives)``.

    Returns the loss and ``dL/dz``.  Exactly zero when every entry is a
    positive; shift-invariant like :func:`info_nce_from_logits`.
    """
    if not 1 <= n_pos <= z.shape[0]:
        raise ValidationFailure(f"n_pos must be in [1, {z.shape[0]}], got {n_pos}")
    lse_all = _logsumexp(z)
    lse_pos = _logsumexp(z[:n_pos])
    dz = np.exp(z - lse_all)
    dz[:n_pos] -= np.exp(z[:n_pos] - lse_pos)
    return lse_all - lse_pos, dz


def _norm_or_raise(v: np.ndarray, what: str) -> float:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroNormVector(f"{what} has zero norm")
    return n


def _cosine_grads(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Cosine of two vectors plus its partials with respect to each."""
    na = _norm_or_raise(a, "vector")
    nb = _norm_or_raise(b, "vector")
    s = float(np.dot(a, b) / (na * nb))
    da = b / (na * nb) - s * a / (na * na)
    db = a / (na * nb) - s * b / (nb * nb)
    return s, da, db


# ---------------------------------------------------------------------------
# Batch container and gradient records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Batch:
    """A batch of (query, document) pairs with optional per-pair boxes.

    ``boxes[i]`` is either a list of ground-truth boxes for pair ``i`` or
    ``None``, in which case pseudo-labels are used for that pair.
    """

    pairs: list[tuple[QueryEmbedding, PatchGrid]]
    boxes: list[list[BBox] | None] | None = None

    def __post_init__(self):
        if not self.pairs:
            raise ValidationFailure("batch must contain at least one pair")
        if self.boxes is not None and len(self.boxes) != len(self.pairs):
            raise ValidationFailure("boxes list must align with pairs")
        dims = {q.dim for q, _ in self.pairs} | {g.dim for _, g in self.pairs}
        if len(dims) != 1:
            raise DimensionMismatch(f"batch mixes embedding dimensions: {sorted(dims)}")

    @property
    def size(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class GlobalGrads:
    """Gradients of the document-level loss: one row per batch entry."""

    queries: list[np.ndarray]   # each (d,)
    patches: list[np.ndarray]   # each (N_i, d)


@dataclass(frozen=True)
class LocalGrads:
    """Gradients of one pair's patch-level loss."""

    query: np.ndarray            # (d,)
    patches: dict[int, np.ndarray]  # patch index -> (d,); only referenced patches


@dataclass(frozen=True)
class LossReport:
    """Values and gradients of the combined objective on one batch."""

    global_value: float
    local_values: list[float]
    combined: float
    query_grads: list[np.ndarray]
    patch_grads: list[np.ndarray]
    hp: HyperParams = field(default_factory=HyperParams)

    @property
    def mean_local(self) -> float:
        return float(np.mean(self.local_values)) if self.local_values else 0.0


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def global_loss(batch: Batch, tau: float) -> tuple[float, GlobalGrads]:
    """In-batch InfoNCE over max-pooled document vectors.

    For batch size B the loss is the mean over rows i of
    ``-log softmax_j(cos(q_i, v_j) / tau)[i]`` where ``v_j`` is the pooled
    vector of document j.  Returns the value and analytic gradients with
    respect to every query vector and every patch embedding.
    """
    if tau <= 0:
        raise ValidationFailure(f"temperature must be positive, got {tau}")
    B = batch.size
    d = batch.pairs[0][0].dim

    Q = np.stack([q.vector for q, _ in batch.pairs])          # (B, d)
    V = np.stack([max_pool_global(g) for _, g in batch.pairs])  # (B, d)
    argmax = [g.embeddings.argmax(axis=0) for _, g in batch.pairs]  # first argmax per column

    qn = np.linalg.norm(Q, axis=1)
    vn = np.linalg.norm(V, axis=1)
    if np.any(qn == 0.0):
        raise ZeroNormVector("a query vector in the batch has zero norm")
    if np.any(vn == 0.0):
        raise ZeroNormVector("a pooled document vector in the batch has zero norm")
    Qh = Q / qn[:, None]
    Vh = V / vn[:, None]

    S = Qh @ Vh.T                    # (B, B) cosine matrix
    value, dZ = info_nce_from_logits(S / tau)
    G = dZ / tau                     # dL/dS

    # dS_ij/dq_i = (Vh_j - S_ij Qh_i) / |q_i|
    row_sums = (G * S).sum(axis=1, keepdims=True)
    dQ = (G @ Vh - row_sums * Qh) / qn[:, None]
    # dS_ij/dv_j = (Qh_i - S_ij Vh_j) / |v_j|
    col_sums = (G * S).sum(axis=0)[:, None]
    dV = (G.T @ Qh - col_sums * Vh) / vn[:, None]

    patch_grads = []
    for j, (_, grid) in enumerate(batch.pairs):
        gp = np.zeros_like(grid.embeddings)
        gp[argmax[j], np.arange(d)] = dV[j]
        patch_grads.append(gp)

    return value, GlobalGrads(queries=[dQ[i] for i in range(B)], patches=patch_grads)


def local_loss(q: QueryEmbedding, grid: PatchGrid, sets: SupervisionSets,
               tau: float) -> tuple[float, LocalGrads]:
    """Grouped contrast between positive and negative patch sets.

    ``-log( sum_{P+} exp(cos/tau) / sum_{P+ u P-} exp(cos/tau) )``,
    computed as a difference of two log-sum-exps so the no-negatives case
    is exactly zero.  Gradients cover the query vector and every patch
    referenced by either set; abstained patches get zero rows.
    """
    if tau <= 0:
        raise ValidationFailure(f"temperature must be positive, got {tau}")
    if not sets.positive:
        raise EmptyPositiveSet("patch-level loss needs at least one positive patch")
    validate_supervision_sets(sets, grid.n_patches)
    if q.dim != grid.dim:
        raise DimensionMismatch(f"query dimension {q.dim} != patch dimension {grid.dim}")

    pos = sorted(sets.positive)
    neg = sorted(sets.negative)
    idx = pos + neg
    n_pos = len(pos)

    qv = q.vector
    sims = np.empty(len(idx))
    dq_parts = np.empty((len(idx), q.dim))
    dp_parts = np.empty((len(idx), q.dim))
    for t, k in enumerate(idx):
        s, dq, dp = _cosine_grads(qv, grid.embeddings[k])
        sims[t] = s
        dq_parts[t] = dq
        dp_parts[t] = dp

    value, dw = group_contrast_from_logits(sims / tau, n_pos)
    dz = dw / tau                             # dL/ds_k

    query_grad = dz @ dq_parts
    patch_grads = {k: dz[t] * dp_parts[t] for t, k in enumerate(idx)}
    return float(value), LocalGrads(query=query_grad, patches=patch_grads)


def combined_loss(batch: Batch, hp: HyperParams) -> LossReport:
    """Weighted sum ``alpha * global + beta * mean(local)`` over a batch.

    Supervision per pair: ground-truth boxes when provided, otherwise
    pseudo-labels at threshold ``hp.theta``.  The report carries the full
    gradient of the combined value for every query vector and patch
    embedding, with label sets held fixed.
    """
    g_value, g_grads = global_loss(batch, hp.tau_global)

    B = batch.size
    local_values: list[float] = []
    query_grads = [hp.alpha * g for g in g_grads.queries]
    patch_grads = [hp.alpha * g for g in g_grads.patches]

    for i, (q, grid) in enumerate(batch.pairs):
        pair_boxes = batch.boxes[i] if batch.boxes is not None else None
        if pair_boxes is not None:
            sets = labels_from_boxes(grid, pair_boxes)
        else:
            sets = labels_from_pseudo(saliency_map(q, grid), hp.theta)
        try:
            l_value, l_grads = local_loss(q, grid, sets, hp.tau_local)
        except EmptyPositiveSet as exc:
            raise EmptyPositiveSet(f"pair {i} ({q.query_id!r}): {exc}") from exc
        local_values.append(l_value)
        scale = hp.beta / B
        query_grads[i] = query_grads[i] + scale * l_grads.query
        for k, g in l_grads.patches.items():
            patch_grads[i][k] += scale * g

    combined = hp.alpha * g_value + hp.beta * float(np.mean(local_values))
    return LossReport(
        global_value=g_value,
        local_values=local_values,
        combined=combined,
        query_grads=query_grads,
        patch_grads=patch_grads,
        hp=hp,
    )

"""Finite-difference verification of the loss gradients.

The oracle is central differences on the loss *values* only, so it stays
independent of the analytic gradient code it checks.  Instances are drawn
so the checks are meaningful:

* max-pooling gradients are undefined at argmax ties, so document
  embeddings are redrawn until every pooled column has a top-two margin
  above ``MARGIN`` (a +-1e-5 probe then cannot flip the argmax);
* pseudo-label sets are discrete, so combined-loss instances keep every
  saliency score at least ``MARGIN`` away from the threshold.

``run_loss_checks`` bundles the value identities, invariance properties
and gradient checks into one deterministic pass/fail report; the CLI
``loss-check`` subcommand is a thin wrapper around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .losses import (
    Batch,
    combined_loss,
    global_loss,
    group_contrast_from_logits,
    info_nce_from_logits,
    labels_from_pseudo,
    local_loss,
)
from .similarity import saliency_map
from .types import HyperParams, PatchGrid, QueryEmbedding, SupervisionSets

__all__ = ["CheckResult", "run_loss_checks", "DEFAULT_STEP", "DEFAULT_RTOL"]

DEFAULT_STEP = 1e-5
DEFAULT_RTOL = 1e-4
ATOL = 1e-7
MARGIN = 1e-3


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _grad_close(analytic: np.ndarray, fd: np.ndarray, rtol: float) -> tuple[bool, float]:
    """Per-component |a - f| <= rtol * max(|a|, |f|) + ATOL; returns worst excess."""
    analytic = np.asarray(analytic, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    tol = rtol * np.maximum(np.abs(analytic), np.abs(fd)) + ATOL
    err = np.abs(analytic - fd)
    worst = float((err / tol).max()) if err.size else 0.0
    return bool((err <= tol).all()), worst


def _make_grid(doc_id: str, emb: np.ndarray) -> PatchGrid:
    n = emb.shape[0]
    return PatchGrid(doc_id=doc_id, rows=1, cols=n, patch_h=4, patch_w=4,
                     img_h=4, img_w=4 * n, embeddings=emb)


def _draw_embeddings(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Patch matrix with safe pooled-argmax margins and nonzero norms."""
    while True:
        emb = rng.normal(size=(n, d))
        if np.any(np.linalg.norm(emb, axis=1) < MARGIN):
            continue
        if float(np.linalg.norm(emb.max(axis=0))) < MARGIN:
            continue
        if n >= 2:
            top2 = np.sort(emb, axis=0)[-2:, :]
            if float((top2[1] - top2[0]).min()) < MARGIN:
                continue
        return emb


def _draw_query(rng: np.random.Generator, d: int, qid: str) -> QueryEmbedding:
    while True:
        v = rng.normal(size=d)
        if float(np.linalg.norm(v)) >= MARGIN:
            return QueryEmbedding(query_id=qid, vector=v)


def _random_batch(rng: np.random.Generator) -> Batch:
    B = int(rng.integers(1, 9))
    d = int(rng.integers(2, 17))
    pairs = []
    for i in range(B):
        n = int(rng.integers(1, 26))
        emb = _draw_embeddings(rng, n, d)
        pairs.append((_draw_query(rng, d, f"q{i}"), _make_grid(f"doc{i}", emb)))
    return Batch(pairs=pairs)


def _rebuild(batch: Batch, q_vecs: list[np.ndarray], embs: list[np.ndarray]) -> Batch:
    pairs = []
    for (q, g), qv, e in zip(batch.pairs, q_vecs, embs):
        pairs.append((QueryEmbedding(query_id=q.query_id, vector=qv),
                      PatchGrid(doc_id=g.doc_id, rows=g.rows, cols=g.cols,
                                patch_h=g.patch_h, patch_w=g.patch_w,
                                img_h=g.img_h, img_w=g.img_w, embeddings=e)))
    return Batch(pairs=pairs)


def _fd_global(batch: Batch, tau: float, step: float,
               fn: Callable) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Central differences of the document-level loss value."""
    q_vecs = [np.array(q.vector) for q, _ in batch.pairs]
    embs = [np.array(g.embeddings) for _, g in batch.pairs]

    def value() -> float:
        return fn(_rebuild(batch, q_vecs, embs), tau)[0]

    q_fd, e_fd = [], []
    for arr, sink in ((q_vecs, q_fd), (embs, e_fd)):
        for i in range(len(arr)):
            grad = np.zeros_like(arr[i])
            flat = arr[i].reshape(-1)
            gflat = grad.reshape(-1)
            for c in range(flat.size):
                orig = flat[c]
                flat[c] = orig + step
                up = value()
                flat[c] = orig - step
                down = value()
                flat[c] = orig
                gflat[c] = (up - down) / (2 * step)
            sink.append(grad)
    return q_fd, e_fd


def _fd_local(q: QueryEmbedding, grid: PatchGrid, sets: SupervisionSets,
              tau: float, step: float, fn: Callable) -> tuple[np.ndarray, np.ndarray]:
    qv = np.array(q.vector)
    emb = np.array(grid.embeddings)

    def value() -> float:
        return fn(QueryEmbedding(query_id=q.query_id, vector=qv),
                  PatchGrid(doc_id=grid.doc_id, rows=grid.rows, cols=grid.cols,
                            patch_h=grid.patch_h, patch_w=grid.patch_w,
                            img_h=grid.img_h, img_w=grid.img_w, embeddings=emb),
                  sets, tau)[0]

    q_fd = np.zeros_like(qv)
    for c in range(qv.size):
        orig = qv[c]
        qv[c] = orig + step
        up = value()
        qv[c] = orig - step
        down = value()
        qv[c] = orig
        q_fd[c] = (up - down) / (2 * step)

    e_fd = np.zeros_like(emb)
    flat = emb.reshape(-1)
    gflat = e_fd.reshape(-1)
    for c in range(flat.size):
        orig = flat[c]
        flat[c] = orig + step
        up = value()
        flat[c] = orig - step
        down = value()
        flat[c] = orig
        gflat[c] = (up - down) / (2 * step)
    return q_fd, e_fd


# ---------------------------------------------------------------------------
# Individual checks
# ---------------------------------------------------------------------------


def _check_global_b1(rng, global_fn) -> CheckResult:
    emb = _draw_embeddings(rng, 5, 6)
    batch = Batch(pairs=[(_draw_query(rng, 6, "q0"), _make_grid("doc0", emb))])
    value, _ = global_fn(batch, 0.02)
    return CheckResult("global_batch1_zero", value == 0.0,
                       f"B=1 loss = {value!r} (must be exactly 0.0)")


def _check_global_uniform(rng, global_fn) -> CheckResult:
    worst = 0.0
    for B in (2, 3, 5, 8):
        q = _draw_query(rng, 7, "q")
        emb = _draw_embeddings(rng, 4, 7)
        pairs = [(QueryEmbedding(query_id=f"q{i}", vector=np.array(q.vector)),
                  _make_grid(f"doc{i}", np.array(emb))) for i in range(B)]
        value, _ = global_fn(Batch(pairs=pairs), 0.02)
        worst = max(worst, abs(value - math.log(B)))
    return CheckResult("global_uniform_lnB", worst <= 1e-9,
                       f"max |loss - ln B| = {worst:.3e} (tol 1e-9)")


def _check_local_closed_form(local_fn) -> CheckResult:
    # One positive at cosine +1, one negative at cosine -1, tau = 0.25:
    # loss = log(1 + e^-8).
    q = QueryEmbedding(query_id="q", vector=np.array([1.0, 0.0]))
    grid = _make_grid("doc", np.array([[2.0, 0.0], [-3.0, 0.0]]))
    sets = SupervisionSets(positive=frozenset({0}), negative=frozenset({1}))
    value, _ = local_fn(q, grid, sets, 0.25)
    expected = math.log1p(math.exp(-8.0))
    err = abs(value - expected)
    return CheckResult("local_closed_form", err <= 1e-12,
                       f"|loss - log(1+e^-8)| = {err:.3e} (tol 1e-12)")


def _check_local_no_negatives(rng, local_fn) -> CheckResult:
    emb = _draw_embeddings(rng, 6, 5)
    q = _draw_query(rng, 5, "q")
    sets = SupervisionSets(positive=frozenset(range(6)), negative=frozenset())
    value, _ = local_fn(q, _make_grid("doc", emb), sets, 0.25)
    return CheckResult("local_empty_negatives_zero", value == 0.0,
                       f"loss = {value!r} (must be exactly 0.0)")


def _check_nonnegative(rng, global_fn, local_fn, n: int = 50) -> CheckResult:
    low = 0.0
    for _ in range(n):
        batch = _random_batch(rng)
        value, _ = global_fn(batch, float(rng.uniform(0.02, 0.5)))
        low = min(low, value)
        q, grid = batch.pairs[0]
        smap = saliency_map(q, grid)
        # Median threshold keeps both sets nonempty on random instances.
        sets = labels_from_pseudo(smap, float(np.median(smap.scores)))
        v2, _ = local_fn(q, grid, sets, 0.25)
        low = min(low, v2)
    return CheckResult("losses_nonnegative", low >= 0.0,
                       f"minimum observed loss = {low:.3e}")


def _check_shift_invariance(rng, n: int = 200) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        B = int(rng.integers(1, 8))
        Z = rng.normal(scale=30.0, size=(B, B))
        shift = float(rng.uniform(-100, 100))
        v0, _ = info_nce_from_logits(Z)
        v1, _ = info_nce_from_logits(Z + shift)
        worst = max(worst, abs(v0 - v1))
        m = int(rng.integers(2, 20))
        n_pos = int(rng.integers(1, m))
        z = rng.normal(scale=30.0, size=m)
        g0, _ = group_contrast_from_logits(z, n_pos)
        g1, _ = group_contrast_from_logits(z + shift, n_pos)
        worst = max(worst, abs(g0 - g1))
    return CheckResult("logit_shift_invariance", worst <= 1e-9,
                       f"max |loss(z) - loss(z+c)| = {worst:.3e} (tol 1e-9)")


def _check_negative_perturbation(rng, n: int = 200) -> CheckResult:
    """Lowering one negative logit never increases the grouped contrast."""
    worst = 0.0
    for _ in range(n):
        m = int(rng.integers(2, 20))
        n_pos = int(rng.integers(1, m))
        z = rng.normal(scale=4.0, size=m)
        v0, _ = group_contrast_from_logits(z, n_pos)
        k = int(rng.integers(n_pos, m))
        z2 = z.copy()
        z2[k] -= float(rng.uniform(0.1, 10.0))
        v1, _ = group_contrast_from_logits(z2, n_pos)
        worst = max(worst, v1 - v0)
    return CheckResult("negative_logit_monotone", worst <= 1e-12,
                       f"max increase after lowering a negative = {worst:.3e}")


def _check_grad_global(rng, n: int, step: float, rtol: float, global_fn) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        batch = _random_batch(rng)
        tau = float(rng.choice([0.02, 0.1, 0.25]))
        _, grads = global_fn(batch, tau)
        q_fd, e_fd = _fd_global(batch, tau, step, global_fn)
        for a, f in zip(grads.queries, q_fd):
            worst = max(worst, _grad_close(a, f, rtol)[1])
        for a, f in zip(grads.patches, e_fd):
            worst = max(worst, _grad_close(a, f, rtol)[1])
    return CheckResult("grad_global_fd", worst <= 1.0,
                       f"{n} instances, worst error/tolerance ratio = {worst:.3f}")


def _check_grad_local(rng, n: int, step: float, rtol: float, local_fn) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(2, 17))
        m = int(rng.integers(1, 26))
        emb = _draw_embeddings(rng, m, d)
        q = _draw_query(rng, d, "q")
        grid = _make_grid("doc", emb)
        perm = rng.permutation(m)
        n_pos = int(rng.integers(1, m + 1))
        n_neg = int(rng.integers(0, m - n_pos + 1))
        sets = SupervisionSets(
            positive=frozenset(int(i) for i in perm[:n_pos]),
            negative=frozenset(int(i) for i in perm[n_pos:n_pos + n_neg]))
        tau = float(rng.choice([0.25, 0.5]))
        _, grads = local_fn(q, grid, sets, tau)
        q_fd, e_fd = _fd_local(q, grid, sets, tau, step, local_fn)
        worst = max(worst, _grad_close(grads.query, q_fd, rtol)[1])
        dense = np.zeros_like(emb)
        for k, g in grads.patches.items():
            dense[k] = g
        worst = max(worst, _grad_close(dense, e_fd, rtol)[1])
    return CheckResult("grad_local_fd", worst <= 1.0,
                       f"{n} instances, worst error/tolerance ratio = {worst:.3f}")


def _check_grad_combined(rng, n: int, step: float, rtol: float) -> CheckResult:
    """Combined loss against finite differences, labels held stable.

    Pseudo-label instances are redrawn until every saliency score clears
    the threshold by MARGIN, so the probe cannot flip a label.
    """
    hp = HyperParams(eta=None)
    worst = 0.0
    done = 0
    while done < n:
        batch = _random_batch(rng)
        stable = True
        for q, grid in batch.pairs:
            s = saliency_map(q, grid)
            if float(np.abs(s.scores - hp.theta).min()) < MARGIN:
                stable = False
                break
            if not np.any(s.scores >= hp.theta):
                stable = False
                break
        if not stable:
            continue
        done += 1
        report = combined_loss(batch, hp)

        def value(b: Batch) -> float:
            return combined_loss(b, hp).combined

        q_vecs = [np.array(q.vector) for q, _ in batch.pairs]
        embs = [np.array(g.embeddings) for _, g in batch.pairs]
        for i in range(len(q_vecs)):
            for c in range(q_vecs[i].size):
                orig = q_vecs[i][c]
                q_vecs[i][c] = orig + step
                up = value(_rebuild(batch, q_vecs, embs))
                q_vecs[i][c] = orig - step
                down = value(_rebuild(batch, q_vecs, embs))
                q_vecs[i][c] = orig
                fd = (up - down) / (2 * step)
                a = float(report.query_grads[i][c])
                tol = rtol * max(abs(a), abs(fd)) + ATOL
                worst = max(worst, abs(a - fd) / tol)
    return CheckResult("grad_combined_fd", worst <= 1.0,
                       f"{n} instances (query grads), worst ratio = {worst:.3f}")


def run_loss_checks(seed: int = 0, n_grad: int = 100, step: float = DEFAULT_STEP,
                    rtol: float = DEFAULT_RTOL,
                    global_fn: Callable = global_loss,
                    local_fn: Callable = local_loss) -> list[CheckResult]:
    """Run the full loss verification suite; deterministic for a fixed seed.

    ``global_fn``/``local_fn`` exist so tests can inject faulty gradients
    and confirm the suite catches them.
    """
    rng = np.random.default_rng(seed)
    results = [
        _check_global_b1(rng, global_fn),
        _check_global_uniform(rng, global_fn),
        _check_local_closed_form(local_fn),
        _check_local_no_negatives(rng, local_fn),
        _check_nonnegative(rng, global_fn, local_fn),
        _check_shift_invariance(rng),
        _check_negative_perturbation(rng),
        _check_grad_global(rng, n_grad, step, rtol, global_fn),
        _check_grad_local(rng, n_grad, step, rtol, local_fn),
        _check_grad_combined(rng, max(3, n_grad // 20), step, rtol),
    ]
    return results

"""Deterministic synthetic corpora with planted relevant regions.

Every query gets exactly one relevant document containing a contiguous
block of patches aligned with that query; everything else is orthogonal
background.  The construction gives hard guarantees used by the
verification suite:

* planted patches have cosine >= 1/sqrt(1 + noise^2) with their query
  (>= 0.9 for noise <= 0.48; exactly 1 at noise 0);
* all other patches in the corpus have cosine exactly 0 with that query,
  so the relevant document is the unique top-1 hit and the planted block
  is the only region above any positive threshold.

Reproducibility is part of the contract: a single SplitMix64 stream
drives all randomness, every arithmetic step is pinned in FORMAT.md, and
independent implementations must produce byte-identical files for the
same seed.  That is why this module uses plain Python floats and spells
out its accumulation order instead of delegating to numpy RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ValidationFailure
from .index import Corpus, DEFAULT_TIMESTAMP
from .metrics import QueryJudgment
from .types import BBox, PatchGrid, QueryEmbedding

__all__ = ["SplitMix64", "SynthConfig", "SynthOutput", "generate", "write_synth"]

# Maximum noise that keeps planted cosines at or above 0.9.
MAX_NOISE = 0.48


class SplitMix64:
    """SplitMix64 PRNG; constants and output mapping are pinned in FORMAT.md."""

    GAMMA = 0x9E3779B97F4A7C15
    MUL1 = 0xBF58476D1CE4E5B9
    MUL2 = 0x94D049BB133111EB
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * self.MUL1) & self.MASK
        z = ((z ^ (z >> 27)) * self.MUL2) & self.MASK
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1): top 53 bits scaled by 2^-53."""
        return (self.next_u64() >> 11) * (2.0 ** -53)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    n_docs: int = 50
    n_queries: int = 100
    rows: int = 8
    cols: int = 8
    dim: int = 0          # 0 = auto: n_queries + 8
    patch_h: int = 28
    patch_w: int = 28
    block_rows: int = 2
    block_cols: int = 2
    noise: float = 0.1

    def resolved_dim(self) -> int:
        return self.dim if self.dim > 0 else self.n_queries + 8


@dataclass(frozen=True)
class SynthOutput:
    corpus: Corpus
    queries: list[QueryEmbedding]
    judgments: list[QueryJudgment]
    boxes: dict[str, tuple[str, BBox]] = field(default_factory=dict)
    block_coords: dict[str, tuple[str, list[tuple[int, int]]]] = field(default_factory=dict)


def _validate_config(cfg: SynthConfig) -> None:
    if cfg.n_docs < 1 or cfg.n_queries < 1:
        raise ValidationFailure("need at least one document and one query")
    if min(cfg.rows, cfg.cols, cfg.patch_h, cfg.patch_w,
           cfg.block_rows, cfg.block_cols) < 1:
        raise ValidationFailure("grid, patch and block dimensions must be positive")
    if not 0.0 <= cfg.noise <= MAX_NOISE:
        raise ValidationFailure(
            f"noise must be in [0, {MAX_NOISE}] to keep planted cosines >= 0.9")
    d = cfg.resolved_dim()
    if d < cfg.n_queries + 2:
        raise ValidationFailure(
            f"dim {d} too small: need >= n_queries + 2 = {cfg.n_queries + 2}")
    n_slots = -(-cfg.n_queries // cfg.n_docs)  # ceil
    if cfg.block_cols > cfg.cols:
        raise ValidationFailure(
            f"planted block ({cfg.block_rows}x{cfg.block_cols}) wider than grid")
    # Slot bands are separated by two blank rows so blocks never merge at r=1.
    needed_rows = n_slots * (cfg.block_rows + 2) - 2
    if needed_rows > cfg.rows:
        raise ValidationFailure(
            f"grid rows {cfg.rows} cannot hold {n_slots} planted blocks "
            f"(need {needed_rows})")


def _unit_background(rng: SplitMix64, n: int) -> list[float]:
    """Unit vector over n coordinates; draws n uniforms (redrawn if degenerate).

    Components start as 2u - 1; the squared norm accumulates left to right
    and each component is divided by its square root.  This exact order is
    part of the reproducibility contract.
    """
    while True:
        comps = [2.0 * rng.next_float() - 1.0 for _ in range(n)]
        sq = 0.0
        for c in comps:
            sq += c * c
        if sq < 1e-18:
            continue
        norm = math.sqrt(sq)
        return [c / norm for c in comps]


def generate(cfg: SynthConfig) -> SynthOutput:
    """Build the corpus, queries, judgments and planted boxes in memory."""
    _validate_config(cfg)
    d = cfg.resolved_dim()
    Q, M = cfg.n_queries, cfg.n_docs
    bg_lo = Q  # background coordinates occupy [Q, d)
    n_bg = d - Q
    img_h = cfg.rows * cfg.patch_h
    img_w = cfg.cols * cfg.patch_w

    queries = []
    for i in range(Q):
        vec = np.zeros(d)
        vec[i] = 1.0
        queries.append(QueryEmbedding(query_id=f"q{i:05d}", vector=vec))

    rng = SplitMix64(cfg.seed)
    corpus = Corpus(created=DEFAULT_TIMESTAMP)
    judgments = []
    boxes: dict[str, tuple[str, BBox]] = {}
    block_coords: dict[str, tuple[str, list[tuple[int, int]]]] = {}

    for m in range(M):
        doc_id = f"doc{m:05d}"
        doc_queries = list(range(m, Q, M))  # query i lands on doc i % M
        # One uniform per slot picks the block's column offset.
        planted: dict[tuple[int, int], int] = {}
        for s, qi in enumerate(doc_queries):
            max_off = cfg.cols - cfg.block_cols
            off = min(int(rng.next_float() * (max_off + 1)), max_off)
            top = s * (cfg.block_rows + 2)
            coords = [(r, c)
                      for r in range(top, top + cfg.block_rows)
                      for c in range(off, off + cfg.block_cols)]
            for coord in coords:
                planted[coord] = qi
            qid = f"q{qi:05d}"
            box = BBox(x1=off * cfg.patch_w,
                       y1=top * cfg.patch_h,
                       x2=min((off + cfg.block_cols) * cfg.patch_w, img_w),
                       y2=min((top + cfg.block_rows) * cfg.patch_h, img_h))
            boxes[qid] = (doc_id, box)
            block_coords[qid] = (doc_id, coords)
            judgments.append(QueryJudgment(query_id=qid,
                                           relevant_doc_ids=frozenset({doc_id})))

        emb = np.zeros((cfg.rows * cfg.cols, d))
        for r in range(cfg.rows):
            for c in range(cfg.cols):
                unit = _unit_background(rng, n_bg)
                k = r * cfg.cols + c
                qi = planted.get((r, c))
                if qi is None:
                    for j, val in enumerate(unit):
                        emb[k, bg_lo + j] = val
                else:
                    vec = [0.0] * d
                    vec[qi] = 1.0
                    sq = 1.0
                    for j, val in enumerate(unit):
                        comp = cfg.noise * val
                        vec[bg_lo + j] = comp
                        sq += comp * comp
                    norm = math.sqrt(sq)
                    for j in range(d):
                        emb[k, j] = vec[j] / norm
        corpus.ingest(PatchGrid(doc_id=doc_id, rows=cfg.rows, cols=cfg.cols,
                                patch_h=cfg.patch_h, patch_w=cfg.patch_w,
                                img_h=img_h, img_w=img_w, embeddings=emb))

    judgments.sort(key=lambda j: j.query_id)
    return SynthOutput(corpus=corpus, queries=queries, judgments=judgments,
                       boxes=boxes, block_coords=block_coords)


def write_synth(cfg: SynthConfig, out_dir: str | Path) -> Path:
    """Materialize a synthetic corpus on disk.

    Layout: ``corpus/*.emb`` plus manifest, ``queries/*.emb``,
    ``judgments.jsonl`` and ``boxes.jsonl``.  Byte-deterministic for a
    fixed config.
    """
    from .wire import write_embedding_file, write_judgments, write_manifest
    import json

    out = generate(cfg)
    out_dir = Path(out_dir)
    corpus_dir = out_dir / "corpus"
    query_dir = out_dir / "queries"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    query_dir.mkdir(parents=True, exist_ok=True)

    paths = {}
    for doc_id in sorted(out.corpus.docs):
        name = doc_id + ".emb"
        write_embedding_file(out.corpus.docs[doc_id], corpus_dir / name)
        paths[doc_id] = name
    write_manifest(out.corpus, corpus_dir, paths)

    for q in out.queries:
        write_embedding_file(q, query_dir / (q.query_id + ".emb"))

    write_judgments(out.judgments, out_dir / "judgments.jsonl")

    with (out_dir / "boxes.jsonl").open("w", encoding="utf-8") as fh:
        for qid in sorted(out.boxes):
            doc_id, box = out.boxes[qid]
            fh.write(json.dumps(
                {"query_id": qid, "doc_id": doc_id,
                 "bbox": [box.x1, box.y1, box.x2, box.y2]},
                separators=(",", ":")) + "\n")
    return out_dir

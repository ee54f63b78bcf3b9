"""Independent implementation of the synthetic planted corpus
(FORMAT.md section 4).

Exists solely for cross-implementation conformance: given the same seed
and geometry, the emitted tree must be byte-identical to the consuming
engine's own generator.  Everything is therefore pure-Python IEEE-754
binary64 arithmetic in exactly the documented order, cast to binary32
only inside the file writer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, IoFailure
from .prng import SplitMix64
from .wire import document_bytes, query_bytes, write_atomic

MAX_NOISE = 0.48
CREATED = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class SynthGeometry:
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


def _validate(cfg: SynthGeometry) -> None:
    if cfg.n_docs < 1 or cfg.n_queries < 1:
        raise ConfigError("need at least one document and one query")
    if min(cfg.rows, cfg.cols, cfg.patch_h, cfg.patch_w,
           cfg.block_rows, cfg.block_cols) < 1:
        raise ConfigError("grid, patch and block dimensions must be positive")
    if not 0.0 <= cfg.noise <= MAX_NOISE:
        raise ConfigError(f"noise must be in [0, {MAX_NOISE}]")
    if cfg.resolved_dim() < cfg.n_queries + 2:
        raise ConfigError(
            f"dim {cfg.resolved_dim()} too small: need >= {cfg.n_queries + 2}")
    n_slots = -(-cfg.n_queries // cfg.n_docs)
    if cfg.block_cols > cfg.cols:
        raise ConfigError("planted block wider than grid")
    if n_slots * (cfg.block_rows + 2) - 2 > cfg.rows:
        raise ConfigError(
            f"grid rows {cfg.rows} cannot hold {n_slots} planted blocks")


def _unit_background(rng: SplitMix64, n: int) -> list[float]:
    # Components 2u-1; squared norm accumulated left to right; redraw on
    # degenerate norm.  Order is part of the byte contract.
    while True:
        comps = [2.0 * rng.next_float() - 1.0 for _ in range(n)]
        sq = 0.0
        for c in comps:
            sq += c * c
        if sq < 1e-18:
            continue
        norm = math.sqrt(sq)
        return [c / norm for c in comps]


def export_synthetic(cfg: SynthGeometry, out_dir: str | Path) -> Path:
    """Write the full synthetic tree; byte-deterministic for a config."""
    _validate(cfg)
    d = cfg.resolved_dim()
    Q, M = cfg.n_queries, cfg.n_docs
    n_bg = d - Q
    img_h = cfg.rows * cfg.patch_h
    img_w = cfg.cols * cfg.patch_w

    out_dir = Path(out_dir)
    corpus_dir = out_dir / "corpus"
    query_dir = out_dir / "queries"
    try:
        corpus_dir.mkdir(parents=True, exist_ok=True)
        query_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc

    rng = SplitMix64(cfg.seed)
    judgments: list[tuple[str, str]] = []   # (query_id, doc_id)
    boxes: list[tuple[str, str, tuple[int, int, int, int]]] = []
    manifest_docs = []

    for m in range(M):
        doc_id = f"doc{m:05d}"
        doc_queries = list(range(m, Q, M))
        planted: dict[tuple[int, int], int] = {}
        for s, qi in enumerate(doc_queries):
            max_off = cfg.cols - cfg.block_cols
            off = min(int(rng.next_float() * (max_off + 1)), max_off)
            top = s * (cfg.block_rows + 2)
            for r in range(top, top + cfg.block_rows):
                for c in range(off, off + cfg.block_cols):
                    planted[(r, c)] = qi
            qid = f"q{qi:05d}"
            judgments.append((qid, doc_id))
            boxes.append((qid, doc_id, (
                off * cfg.patch_w,
                top * cfg.patch_h,
                min((off + cfg.block_cols) * cfg.patch_w, img_w),
                min((top + cfg.block_rows) * cfg.patch_h, img_h))))

        vectors: list[list[float]] = []
        for r in range(cfg.rows):
            for c in range(cfg.cols):
                unit = _unit_background(rng, n_bg)
                qi = planted.get((r, c))
                vec = [0.0] * d
                if qi is None:
                    for j, val in enumerate(unit):
                        vec[Q + j] = val
                else:
                    vec[qi] = 1.0
                    sq = 1.0
                    for j, val in enumerate(unit):
                        comp = cfg.noise * val
                        vec[Q + j] = comp
                        sq += comp * comp
                    norm = math.sqrt(sq)
                    vec = [v / norm for v in vec]
                vectors.append(vec)

        data = document_bytes(doc_id, cfg.rows, cfg.cols, cfg.patch_h,
                              cfg.patch_w, img_h, img_w, vectors)
        write_atomic(data, corpus_dir / f"{doc_id}.emb")
        manifest_docs.append({"doc_id": doc_id, "path": f"{doc_id}.emb",
                              "rows": cfg.rows, "cols": cfg.cols,
                              "img_h": img_h, "img_w": img_w})

    for i in range(Q):
        vec = [0.0] * d
        vec[i] = 1.0
        write_atomic(query_bytes(f"q{i:05d}", [vec], raw_tokens=False),
                     query_dir / f"q{i:05d}.emb")

    manifest = {
        "format": "regionsearch-corpus",
        "version": 1,
        "created": CREATED,
        "dim": d,
        "patch_h": cfg.patch_h,
        "patch_w": cfg.patch_w,
        "docs": manifest_docs,
    }
    _write_text(corpus_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")

    judgments.sort(key=lambda pair: pair[0])
    _write_text(out_dir / "judgments.jsonl", "".join(
        json.dumps({"query_id": qid, "relevant_doc_ids": [doc_id]},
                   separators=(",", ":")) + "\n"
        for qid, doc_id in judgments))

    boxes.sort(key=lambda item: item[0])
    _write_text(out_dir / "boxes.jsonl", "".join(
        json.dumps({"query_id": qid, "doc_id": doc_id, "bbox": list(bbox)},
                   separators=(",", ":")) + "\n"
        for qid, doc_id, bbox in boxes))
    return out_dir


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc

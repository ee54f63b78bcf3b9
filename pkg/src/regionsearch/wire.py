"""File formats: binary embedding files, corpus manifests, result streams,
judgments, and saliency renders.

The embedding file layout is the normative cross-implementation contract
(see FORMAT.md for the full story).  All integers are little-endian:

    offset  size  field
    0       4     magic "RRAG"
    4       2     format version (currently 1), u16
    6       1     record kind: 1 = document, 2 = query
    7       1     flags: bit 0 = query payload is raw token vectors
    8       4     d, embedding dimension, u32
    12      4     rows, u32            (queries: number of stored vectors)
    16      4     cols, u32            (queries: 1)
    20      4     patch_h, u32         (queries: 0)
    24      4     patch_w, u32         (queries: 0)
    28      4     img_h, u32           (queries: 0)
    32      4     img_w, u32           (queries: 0)
    36      4     id_len, u32
    40      ...   UTF-8 id, then n_vecs * d float32 LE, row-major

Documents store ``rows * cols`` vectors.  Queries store either the single
aggregated vector (flags bit 0 clear, rows == 1) or the raw token vectors
(bit 0 set); in the latter case the aggregated vector is recomputed on
read, so it never hits the wire.  A file must be exactly header + id +
payload long.  Wire floats are 32-bit; memory is 64-bit.

The reader is total: any byte stream yields either a validated value or a
``ParseError`` / ``UnsupportedVersion`` / ``ValidationFailure``.
"""

from __future__ import annotations

import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .exceptions import (
    IoFailure,
    NonFiniteComponent,
    ParseError,
    UnsupportedVersion,
    ValidationFailure,
)
from .index import Corpus, RetrievalResult
from .metrics import QueryJudgment
from .types import (
    Mask,
    PatchGrid,
    QueryEmbedding,
    SaliencyMap,
    validate_patch_grid,
    validate_query,
)

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "write_embedding_file",
    "read_embedding_file",
    "read_embedding_bytes",
    "embedding_bytes",
    "write_manifest",
    "load_corpus",
    "result_to_record",
    "write_results",
    "read_results",
    "write_judgments",
    "read_judgments",
    "render_saliency",
]

MAGIC = b"RRAG"
FORMAT_VERSION = 1
KIND_DOCUMENT = 1
KIND_QUERY = 2
FLAG_RAW_TOKENS = 0x01

_HEADER = struct.Struct("<4sHBBIIIIIIII")
HEADER_SIZE = _HEADER.size  # 40

MANIFEST_NAME = "manifest.json"
EMBEDDING_SUFFIX = ".emb"


# ---------------------------------------------------------------------------
# Embedding files
# ---------------------------------------------------------------------------


def embedding_bytes(obj: PatchGrid | QueryEmbedding) -> bytes:
    """Serialize a validated grid or query to wire bytes."""
    if isinstance(obj, PatchGrid):
        validate_patch_grid(obj)
        ident = obj.doc_id.encode("utf-8")
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, KIND_DOCUMENT, 0,
                              obj.dim, obj.rows, obj.cols,
                              obj.patch_h, obj.patch_w, obj.img_h, obj.img_w,
                              len(ident))
        payload = np.ascontiguousarray(obj.embeddings, dtype="<f4").tobytes()
        return header + ident + payload
    if isinstance(obj, QueryEmbedding):
        validate_query(obj)
        ident = obj.query_id.encode("utf-8")
        if obj.raw_token_vectors is not None:
            vecs = obj.raw_token_vectors
            flags = FLAG_RAW_TOKENS
        else:
            vecs = obj.vector.reshape(1, -1)
            flags = 0
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, KIND_QUERY, flags,
                              obj.dim, vecs.shape[0], 1, 0, 0, 0, 0, len(ident))
        payload = np.ascontiguousarray(vecs, dtype="<f4").tobytes()
        return header + ident + payload
    raise ValidationFailure(f"cannot serialize object of type {type(obj).__name__}")


def write_embedding_file(obj: PatchGrid | QueryEmbedding, path: str | Path) -> Path:
    """Write wire bytes atomically (temp file + rename)."""
    path = Path(path)
    data = embedding_bytes(obj)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            tmp.unlink(missing_ok=True)
        except OSError:
            pass
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_embedding_bytes(data: bytes) -> PatchGrid | QueryEmbedding:
    """Decode wire bytes; total over arbitrary input."""
    if len(data) < HEADER_SIZE:
        raise ParseError(f"file too short for header ({len(data)} bytes)",
                         offset=len(data))
    magic, version, kind, flags, d, rows, cols, ph, pw, ih, iw, id_len = \
        _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(version)
    if kind not in (KIND_DOCUMENT, KIND_QUERY):
        raise ParseError(f"unknown record kind {kind}", offset=6)
    if flags & ~FLAG_RAW_TOKENS:
        raise ParseError(f"unknown flag bits 0x{flags:02x}", offset=7)
    if kind == KIND_DOCUMENT and flags:
        raise ParseError("document records take no flags", offset=7)
    if d < 1:
        raise ParseError("embedding dimension must be >= 1", offset=8)
    if rows < 1 or cols < 1:
        raise ParseError(f"vector grid {rows}x{cols} must be positive", offset=12)
    if kind == KIND_QUERY:
        if cols != 1:
            raise ParseError("query records must have cols == 1", offset=16)
        if not (flags & FLAG_RAW_TOKENS) and rows != 1:
            raise ParseError("aggregated query records store exactly one vector",
                             offset=12)
        if (ph, pw, ih, iw) != (0, 0, 0, 0):
            raise ParseError("query records must zero the geometry fields", offset=20)

    n_vecs = rows * cols
    expected = HEADER_SIZE + id_len + n_vecs * d * 4
    if len(data) != expected:
        raise ParseError(
            f"expected {expected} bytes ({n_vecs} vectors of dim {d}), got {len(data)}",
            offset=min(len(data), expected))
    try:
        ident = data[HEADER_SIZE:HEADER_SIZE + id_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"id is not valid UTF-8: {exc}", offset=HEADER_SIZE) from exc
    if not ident:
        raise ParseError("empty record id", offset=36)

    raw = np.frombuffer(data, dtype="<f4", count=n_vecs * d,
                        offset=HEADER_SIZE + id_len)
    with np.errstate(invalid="ignore"):  # signaling NaNs are caught below
        vecs = raw.astype(np.float64).reshape(n_vecs, d)

    if kind == KIND_DOCUMENT:
        grid = PatchGrid(doc_id=ident, rows=rows, cols=cols,
                         patch_h=ph, patch_w=pw, img_h=ih, img_w=iw,
                         embeddings=vecs)
        validate_patch_grid(grid)
        return grid

    if not np.isfinite(vecs).all():
        raise NonFiniteComponent(f"query {ident!r} contains NaN or infinity")
    if flags & FLAG_RAW_TOKENS:
        query = QueryEmbedding.from_tokens(ident, vecs)
    else:
        query = QueryEmbedding(query_id=ident, vector=vecs[0])
    validate_query(query)
    return query


def read_embedding_file(path: str | Path) -> PatchGrid | QueryEmbedding:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return read_embedding_bytes(data)


# ---------------------------------------------------------------------------
# Corpus manifest
# ---------------------------------------------------------------------------


def _manifest_record(corpus: Corpus, paths: dict[str, str]) -> dict:
    first = corpus.docs[next(iter(sorted(corpus.docs)))]
    return {
        "format": "regionsearch-corpus",
        "version": 1,
        "created": corpus.created,
        "dim": corpus.dim,
        "patch_h": first.patch_h,
        "patch_w": first.patch_w,
        "docs": [
            {
                "doc_id": doc_id,
                "path": paths[doc_id],
                "rows": corpus.docs[doc_id].rows,
                "cols": corpus.docs[doc_id].cols,
                "img_h": corpus.docs[doc_id].img_h,
                "img_w": corpus.docs[doc_id].img_w,
            }
            for doc_id in sorted(corpus.docs)
        ],
    }


def write_manifest(corpus: Corpus, dir_path: str | Path,
                   paths: dict[str, str]) -> Path:
    """Write ``manifest.json`` for a corpus whose files live under dir_path.

    ``paths`` maps doc_id to the embedding file path relative to the
    manifest directory.  Serialization is pinned (2-space indent, fixed
    key order, trailing newline) so equal corpora give equal bytes.
    """
    dir_path = Path(dir_path)
    if corpus.size == 0:
        raise ValidationFailure("refusing to write a manifest for an empty corpus")
    record = _manifest_record(corpus, paths)
    out = dir_path / MANIFEST_NAME
    try:
        out.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {out}: {exc}") from exc
    return out


def load_corpus(manifest_path: str | Path) -> Corpus:
    """Load every document listed in a manifest; validates as it goes."""
    manifest_path = Path(manifest_path)
    try:
        record = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(record, dict) or record.get("format") != "regionsearch-corpus":
        raise ParseError(f"{manifest_path} is not a corpus manifest")
    corpus = Corpus(created=str(record.get("created", Corpus().created)))
    base = manifest_path.parent
    for entry in record.get("docs", []):
        obj = read_embedding_file(base / entry["path"])
        if not isinstance(obj, PatchGrid):
            raise ParseError(f"{entry['path']} is not a document record")
        corpus.ingest(obj)
    return corpus


# ---------------------------------------------------------------------------
# Results and judgments (JSONL)
# ---------------------------------------------------------------------------


def result_to_record(result: RetrievalResult) -> dict:
    """One JSON-ready object per query result."""
    docs = []
    for ds in result.ranked_docs:
        regs = result.regions.get(ds.doc_id, [])
        docs.append({
            "doc_id": ds.doc_id,
            "score": ds.score,
            "regions": [
                {
                    "bbox": [r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2],
                    "peak": r.peak_score,
                    "mean": r.mean_score,
                    "patches": len(r.component),
                }
                for r in regs
            ],
            "tokens": result.token_report["per_doc"][ds.doc_id],
        })
    return {
        "query_id": result.query_id,
        "docs": docs,
        "token_report": {
            "image": result.token_report["image"],
            "bbox": result.token_report["bbox"],
        },
    }


def write_results(records: list[dict], path: str | Path) -> Path:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_results(path: str | Path) -> list[dict]:
    path = Path(path)
    records = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if "query_id" not in record or "docs" not in record:
            raise ParseError(f"{path}:{lineno}: not a result record")
        records.append(record)
    return records


def write_judgments(judgments: list[QueryJudgment], path: str | Path) -> Path:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for j in judgments:
                fh.write(json.dumps(
                    {"query_id": j.query_id,
                     "relevant_doc_ids": sorted(j.relevant_doc_ids)},
                    separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_judgments(path: str | Path) -> dict[str, QueryJudgment]:
    path = Path(path)
    out: dict[str, QueryJudgment] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            out[record["query_id"]] = QueryJudgment(
                query_id=record["query_id"],
                relevant_doc_ids=frozenset(record["relevant_doc_ids"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}:{lineno}: invalid judgment: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Saliency rendering
# ---------------------------------------------------------------------------


def _to_gray(score: float) -> int:
    # Linear [-1, 1] -> [0, 255], rounding half up.
    return max(0, min(255, math.floor(255.0 * (score + 1.0) / 2.0 + 0.5)))


def render_saliency(s: SaliencyMap, mask: Mask | None, path: str | Path) -> list[Path]:
    """Write the saliency map as a plain (ASCII) PGM, one pixel per patch.

    With a mask, a second ``*_masked.pgm`` file zeroes the masked-out
    cells.  Returns the written paths.
    """
    path = Path(path)
    values = [_to_gray(float(v)) for v in s.scores]

    def pgm(vals: list[int]) -> str:
        lines = [f"P2", f"{s.cols} {s.rows}", "255"]
        for r in range(s.rows):
            lines.append(" ".join(str(v) for v in vals[r * s.cols:(r + 1) * s.cols]))
        return "\n".join(lines) + "\n"

    written = []
    try:
        path.write_text(pgm(values), encoding="ascii")
        written.append(path)
        if mask is not None:
            if (mask.rows, mask.cols) != (s.rows, s.cols):
                raise ValidationFailure("mask and saliency map shapes differ")
            masked = [v if bit else 0 for v, bit in zip(values, mask.bits)]
            masked_path = path.with_name(path.stem + "_masked" + (path.suffix or ".pgm"))
            masked_path.write_text(pgm(masked), encoding="ascii")
            written.append(masked_path)
    except OSError as exc:
        raise IoFailure(f"cannot write saliency render: {exc}") from exc
    return written

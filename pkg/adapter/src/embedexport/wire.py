"""Writer for the embedding file format (FORMAT.md section 1).

This is a producer-only module: the consuming engine owns the reader and
validation.  The layout is re-stated here only as far as the writer needs
it; FORMAT.md is normative.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, IoFailure

MAGIC = b"RRAG"
VERSION = 1
KIND_DOCUMENT = 1
KIND_QUERY = 2
FLAG_RAW_TOKENS = 0x01

_HEADER = struct.Struct("<4sHBBIIIIIIII")


def _payload(vectors: Sequence[Sequence[float]], d: int) -> bytes:
    out = bytearray()
    for vec in vectors:
        if len(vec) != d:
            raise ConfigError(f"vector of length {len(vec)} in a d={d} record")
        out += struct.pack(f"<{d}f", *vec)
    return bytes(out)


def document_bytes(doc_id: str, rows: int, cols: int, patch_h: int, patch_w: int,
                   img_h: int, img_w: int,
                   vectors: Sequence[Sequence[float]]) -> bytes:
    if len(vectors) != rows * cols:
        raise ConfigError(f"expected {rows * cols} vectors, got {len(vectors)}")
    if not vectors or not vectors[0]:
        raise ConfigError("document needs at least one nonempty vector")
    if not doc_id:
        raise ConfigError("document id must be nonempty")
    d = len(vectors[0])
    ident = doc_id.encode("utf-8")
    header = _HEADER.pack(MAGIC, VERSION, KIND_DOCUMENT, 0, d, rows, cols,
                          patch_h, patch_w, img_h, img_w, len(ident))
    return header + ident + _payload(vectors, d)


def query_bytes(query_id: str, vectors: Sequence[Sequence[float]],
                raw_tokens: bool) -> bytes:
    """Query record: raw token vectors (flagged) or one aggregated vector."""
    if not query_id:
        raise ConfigError("query id must be nonempty")
    if not vectors or not vectors[0]:
        raise ConfigError("query needs at least one nonempty vector")
    if not raw_tokens and len(vectors) != 1:
        raise ConfigError("an aggregated query stores exactly one vector")
    d = len(vectors[0])
    ident = query_id.encode("utf-8")
    flags = FLAG_RAW_TOKENS if raw_tokens else 0
    header = _HEADER.pack(MAGIC, VERSION, KIND_QUERY, flags, d,
                          len(vectors), 1, 0, 0, 0, 0, len(ident))
    return header + ident + _payload(vectors, d)


def write_atomic(data: bytes, path: str | Path) -> Path:
    """Write via temp file + rename so consumers never see partial files."""
    path = Path(path)
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

"""Export entry points: images and query text to wire files.

The exporter never computes similarities or regions; it is strictly a
producer of wire-format bytes for the retrieval engine to validate and
consume.  Files are written atomically, so a failed export leaves
nothing behind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .encoders import load_encoder
from .errors import ConfigError, ImageDecodeFailure
from .wire import document_bytes, query_bytes, write_atomic


@dataclass(frozen=True)
class AdapterConfig:
    """Backend selection plus target geometry and output location."""

    model: str = "hash-projection"
    device: str = "cpu"
    dim: int = 64
    patch_h: int = 28
    patch_w: int = 28
    out_dir: Path = field(default_factory=lambda: Path("."))


def _decode_image(image_path: str | Path):
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageDecodeFailure(f"Pillow is required to decode images: {exc}") from exc
    try:
        img = Image.open(image_path)
        img.load()
        return img.convert("RGB")
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ImageDecodeFailure(f"cannot decode {image_path}: {exc}") from exc


def export_document(image_path: str | Path, config: AdapterConfig) -> Path:
    """Encode one image into a document record named after the file stem."""
    encoder = load_encoder(config)
    img = _decode_image(image_path)
    rows, cols, patch_h, patch_w, vectors = encoder.embed_image(img)
    w, h = img.size
    doc_id = Path(image_path).stem
    data = document_bytes(doc_id, rows, cols, patch_h, patch_w, h, w, vectors)
    return write_atomic(data, Path(config.out_dir) / f"{doc_id}.emb")


def export_query(text: str, config: AdapterConfig, query_id: str) -> Path:
    """Encode query text into a query record with raw token vectors.

    The aggregated vector is intentionally not stored: the consumer
    recomputes it from the tokens, keeping one aggregation rule in one
    place.
    """
    if not text.strip():
        raise ConfigError("query text is empty")
    if not query_id:
        raise ConfigError("query id must be nonempty")
    encoder = load_encoder(config)
    vectors = encoder.embed_text(text)
    data = query_bytes(query_id, vectors, raw_tokens=True)
    return write_atomic(data, Path(config.out_dir) / f"{query_id}.emb")

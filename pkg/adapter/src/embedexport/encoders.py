"""Encoder backends.

The exporter is model-agnostic: anything that can turn an image into a
grid of per-patch vectors (and text into per-token vectors) can produce
wire files.  Backends implement :class:`PatchEncoder` and are selected by
the ``model`` config field:

* ``hash-projection`` (default): a deterministic, dependency-light
  encoder that derives each patch vector from a digest of the patch's
  pixel bytes.  It has no semantics worth retrieving, but it exercises
  the full image -> grid -> file pipeline reproducibly, which is what
  the format tests need.
* ``some.module:factory``: a plugin hook.  The named factory is imported
  and called with the :class:`~embedexport.export.AdapterConfig`; it must
  return a ``PatchEncoder``.  Wrapping a real vision-language encoder
  (per-patch hidden states for images, token embeddings for text) is a
  few lines behind this hook and keeps heavyweight ML stacks out of this
  package's dependencies.
"""

from __future__ import annotations

import hashlib
import importlib
import math
from typing import Protocol

from .errors import ConfigError, ModelLoadFailure
from .prng import SplitMix64


class PatchEncoder(Protocol):
    """What the exporter needs from a backend."""

    def embed_image(self, img) -> tuple[int, int, int, int, list[list[float]]]:
        """Returns (rows, cols, patch_h, patch_w, vectors) for a PIL image.

        The grid must reflect the encoder's actual patching: rows*cols
        vectors in row-major order, covering the image with at most one
        overhanging tile per axis.
        """
        ...

    def embed_text(self, text: str) -> list[list[float]]:
        """Per-token vectors for a query string (at least one)."""
        ...


def _digest_unit_vector(data: bytes, dim: int) -> list[float]:
    """Unit vector seeded by a content digest; redrawn if degenerate."""
    seed = int.from_bytes(hashlib.sha256(data).digest()[:8], "little")
    rng = SplitMix64(seed)
    while True:
        comps = [2.0 * rng.next_float() - 1.0 for _ in range(dim)]
        sq = sum(c * c for c in comps)
        if sq >= 1e-18:
            norm = math.sqrt(sq)
            return [c / norm for c in comps]


class HashProjectionEncoder:
    """Deterministic content-hash encoder (see module docstring)."""

    def __init__(self, dim: int = 64, patch_h: int = 28, patch_w: int = 28):
        if dim < 1 or patch_h < 1 or patch_w < 1:
            raise ConfigError("dim and patch sizes must be positive")
        self.dim = dim
        self.patch_h = patch_h
        self.patch_w = patch_w

    def embed_image(self, img):
        w, h = img.size
        if w < 1 or h < 1:
            raise ConfigError("image has no pixels")
        rows = -(-h // self.patch_h)
        cols = -(-w // self.patch_w)
        vectors = []
        for r in range(rows):
            for c in range(cols):
                x1 = c * self.patch_w
                y1 = r * self.patch_h
                tile = img.crop((x1, y1, min(x1 + self.patch_w, w),
                                 min(y1 + self.patch_h, h)))
                vectors.append(_digest_unit_vector(tile.tobytes(), self.dim))
        return rows, cols, self.patch_h, self.patch_w, vectors

    def embed_text(self, text: str) -> list[list[float]]:
        tokens = text.split()
        if not tokens:
            raise ConfigError("query text has no tokens")
        return [_digest_unit_vector(tok.encode("utf-8"), self.dim)
                for tok in tokens]


def load_encoder(config) -> PatchEncoder:
    """Resolve the backend named by ``config.model``."""
    name = config.model
    if name == "hash-projection":
        return HashProjectionEncoder(dim=config.dim, patch_h=config.patch_h,
                                     patch_w=config.patch_w)
    if ":" in name:
        module_name, _, attr = name.partition(":")
        try:
            factory = getattr(importlib.import_module(module_name), attr)
        except (ImportError, AttributeError) as exc:
            raise ModelLoadFailure(f"cannot load encoder factory {name!r}: {exc}") from exc
        encoder = factory(config)
        for method in ("embed_image", "embed_text"):
            if not callable(getattr(encoder, method, None)):
                raise ModelLoadFailure(f"{name!r} did not return a PatchEncoder")
        return encoder
    raise ModelLoadFailure(
        f"unknown encoder {name!r}: use 'hash-projection' or a "
        f"'module:factory' plugin spec")

"""Exception hierarchy for the regionsearch engine.

``ValidationFailure`` is the base of every invariant violation, so callers
can catch one class to mean "the input was structurally bad" while still
matching on the precise failure.  File parsing gets its own branch because
a malformed byte stream is not the same thing as a well-formed but invalid
value.
"""

from __future__ import annotations


class RegionSearchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationFailure(RegionSearchError):
    """A value violates one of its declared invariants."""


class DimensionMismatch(ValidationFailure):
    """Vector/grid dimensions disagree (embedding count or vector width)."""


class NonFiniteComponent(ValidationFailure):
    """An embedding or score contains NaN or infinity."""


class GeometryInconsistent(ValidationFailure):
    """Grid dimensions and patch size do not cover the image exactly once."""


class ZeroNormVector(ValidationFailure):
    """A vector that must have nonzero Euclidean norm does not."""


class EmptyGrid(ValidationFailure):
    """A patch grid with no patches where at least one is required."""


class EmptyCorpus(ValidationFailure):
    """A retrieval request against a corpus with no documents."""


class EmptyComponent(ValidationFailure):
    """A connected component with no coordinates."""


class EmptyPositiveSet(ValidationFailure):
    """A contrastive loss was asked for with no positive patches."""


class BoxOutOfBounds(ValidationFailure):
    """A bounding box falls outside its document's pixel extent."""


class DuplicateDocId(ValidationFailure):
    """A ranked list contains the same document id twice."""


class ParseError(RegionSearchError):
    """A byte stream could not be decoded as an embedding file.

    ``offset`` is the byte position at which decoding failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (at byte {offset})")
        self.offset = offset


class UnsupportedVersion(RegionSearchError):
    """The file declares a format version this reader does not know."""

    def __init__(self, version: int):
        super().__init__(f"unsupported embedding file version {version}")
        self.version = version


class IoFailure(RegionSearchError):
    """Wraps an OS-level failure while reading or writing artifacts."""

"""Error types for the exporter."""


class ExportError(Exception):
    """Base class for exporter failures."""


class ConfigError(ExportError):
    """Invalid parameters (geometry, dimensions, empty input)."""


class ModelLoadFailure(ExportError):
    """The requested encoder backend could not be loaded."""


class ImageDecodeFailure(ExportError):
    """The input image could not be decoded."""


class IoFailure(ExportError):
    """Wraps an OS-level failure while writing output files."""

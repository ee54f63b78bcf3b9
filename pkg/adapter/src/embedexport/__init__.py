"""Embedding exporter for the regionsearch wire format.

Encodes images and query text with a pluggable encoder backend and
writes the binary embedding files the retrieval engine consumes (the
byte contract lives in the engine repo's FORMAT.md).  Also carries an
independent implementation of the synthetic-corpus generator so the two
codebases can be checked against each other byte for byte.
"""

from .conformance import check_against_golden, load_golden, make_golden
from .encoders import HashProjectionEncoder, PatchEncoder, load_encoder
from .errors import (
    ConfigError,
    ExportError,
    ImageDecodeFailure,
    IoFailure,
    ModelLoadFailure,
)
from .export import AdapterConfig, export_document, export_query
from .prng import SplitMix64
from .synthgen import SynthGeometry, export_synthetic
from .wire import document_bytes, query_bytes, write_atomic

__version__ = "0.1.0"

"""Region-level retrieval over patch-embedding grids.

Documents are grids of patch embeddings; retrieval ranks documents by
max-pooled cosine similarity, then proposes query-relevant pixel regions
from per-patch saliency maps.  The package also ships a reference
implementation of the paired contrastive training objective (with
analytic gradients and a finite-difference checker), IR evaluation
metrics, a binary wire format, and a CLI (``regionsearch --help``).
"""

from .exceptions import (
    BoxOutOfBounds,
    DimensionMismatch,
    DuplicateDocId,
    EmptyComponent,
    EmptyCorpus,
    EmptyGrid,
    EmptyPositiveSet,
    GeometryInconsistent,
    IoFailure,
    NonFiniteComponent,
    ParseError,
    RegionSearchError,
    UnsupportedVersion,
    ValidationFailure,
    ZeroNormVector,
)
from .types import (
    BBox,
    HyperParams,
    Mask,
    PatchGrid,
    QueryEmbedding,
    SaliencyMap,
    SupervisionSets,
    aggregate_token_vectors,
    validate_bbox,
    validate_hyperparams,
    validate_patch_grid,
    validate_query,
    validate_saliency_map,
    validate_supervision_sets,
)
from .similarity import DocScore, cosine, max_pool_global, saliency_map, score_document
from .regions import (
    Component,
    RegionResult,
    binarize,
    chebyshev,
    find_components,
    min_bbox,
    propose_regions,
)
from .index import Corpus, RetrievalResult, retrieve_regions, retrieve_topk, token_count
from .losses import (
    Batch,
    GlobalGrads,
    LocalGrads,
    LossReport,
    combined_loss,
    global_loss,
    group_contrast_from_logits,
    info_nce_from_logits,
    labels_from_boxes,
    labels_from_pseudo,
    local_loss,
)
from .gradcheck import CheckResult, run_loss_checks
from .metrics import QueryJudgment, ndcg_at_k, recall_at_k, relaxed_exact_match
from .wire import (
    read_embedding_bytes,
    read_embedding_file,
    read_judgments,
    read_results,
    render_saliency,
    write_embedding_file,
    write_judgments,
    write_manifest,
    load_corpus,
)
from .synth import SplitMix64, SynthConfig, SynthOutput, generate, write_synth
from .estimator import RegionSearcher

__version__ = "0.1.0"

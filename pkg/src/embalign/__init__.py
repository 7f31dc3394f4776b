"""Test-time distribution alignment for embedding-based retrieval.

The library fuses multi-view and text descriptors, refines query
embeddings toward a target gallery with confidence-thresholded
pseudo-labels and KL-style gradient updates, and evaluates retrieval
quality with mAP, NDCG, ANMRR, and precision-recall curves.
"""

from .align import (
    AlignmentConfig,
    OptimizerState,
    PseudoLabelMatrix,
    align,
    compute_update,
    harden_pseudo_labels,
    kl_objective,
    similarity_distribution,
    step,
)
from .errors import (
    DegenerateDescriptorError,
    DegenerateRowError,
    EvaluationError,
    FormatError,
    TruncationError,
    ValidationError,
    WriteError,
)
from .fusion import (
    FusionConfig,
    ViewFeatureBlock,
    build_descriptor_set,
    fuse,
    mean_pool,
)
from .io import (
    LabeledSet,
    read_labels,
    read_manifest,
    read_matrix,
    write_labels,
    write_manifest,
    write_matrix,
)
from .metrics import (
    MetricsReport,
    PRCurve,
    QueryMetrics,
    anmrr,
    average_precision,
    evaluate,
    ndcg,
    pr_curve,
    pr_curve_to_csv,
    rank,
    relevant_sets_from_labels,
    report_to_json,
    score_matrix,
)
from .synth import GapSpec, generate, oracle_metrics

__version__ = "0.1.0"

__all__ = [
    "AlignmentConfig",
    "DegenerateDescriptorError",
    "DegenerateRowError",
    "EvaluationError",
    "FormatError",
    "FusionConfig",
    "GapSpec",
    "LabeledSet",
    "MetricsReport",
    "OptimizerState",
    "PRCurve",
    "PseudoLabelMatrix",
    "QueryMetrics",
    "TruncationError",
    "ValidationError",
    "ViewFeatureBlock",
    "WriteError",
    "align",
    "anmrr",
    "average_precision",
    "build_descriptor_set",
    "compute_update",
    "evaluate",
    "fuse",
    "generate",
    "harden_pseudo_labels",
    "kl_objective",
    "mean_pool",
    "ndcg",
    "oracle_metrics",
    "pr_curve",
    "pr_curve_to_csv",
    "rank",
    "read_labels",
    "read_manifest",
    "read_matrix",
    "relevant_sets_from_labels",
    "report_to_json",
    "score_matrix",
    "similarity_distribution",
    "step",
    "write_labels",
    "write_manifest",
    "write_matrix",
]

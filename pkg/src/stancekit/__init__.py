"""Transitive stance propagation and ensemble tooling for sentence-pair classification."""

__version__ = "0.1.0"

from .blending import BlendSpec, EvalReport, blend, evaluate_accuracy, search_blend_weight
from .dataset import (
    ColumnSchema,
    Dataset,
    Label,
    PairRecord,
    SentenceStore,
    dataset_stats,
    intern,
    load_pairs,
    load_predictions,
    normalize_sentence,
)
from .ensemble import (
    PredictionMatrix,
    StackedFeatures,
    StackerModel,
    TrainConfig,
    load_model,
    save_model,
    stack_features,
    stacker_predict,
    train_stacker,
)
from .errors import ConsistencyError, DataError
from .graph import (
    AgreementPartition,
    AuditReport,
    Closure,
    Conflict,
    DisagreementRelation,
    RelationGraph,
    agreement_partition,
    audit_consistency,
    build_graph,
    derive_label,
    detect_conflicts,
    disagreement_relation,
    enumerate_closure,
)
from .pseudo import MergeMode, SoftRecord, make_soft_labels, merge
from .transitive import AugmentedPair, TransitivePrediction, augment, overlay_predictions, predict_pairs

__all__ = [
    "BlendSpec",
    "EvalReport",
    "blend",
    "evaluate_accuracy",
    "search_blend_weight",
    "ColumnSchema",
    "Dataset",
    "Label",
    "PairRecord",
    "SentenceStore",
    "dataset_stats",
    "intern",
    "load_pairs",
    "load_predictions",
    "normalize_sentence",
    "PredictionMatrix",
    "StackedFeatures",
    "StackerModel",
    "TrainConfig",
    "load_model",
    "save_model",
    "stack_features",
    "stacker_predict",
    "train_stacker",
    "ConsistencyError",
    "DataError",
    "AgreementPartition",
    "AuditReport",
    "Closure",
    "Conflict",
    "DisagreementRelation",
    "RelationGraph",
    "agreement_partition",
    "audit_consistency",
    "build_graph",
    "derive_label",
    "detect_conflicts",
    "disagreement_relation",
    "enumerate_closure",
    "MergeMode",
    "SoftRecord",
    "make_soft_labels",
    "merge",
    "AugmentedPair",
    "TransitivePrediction",
    "augment",
    "overlay_predictions",
    "predict_pairs",
]

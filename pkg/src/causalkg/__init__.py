"""Hyper-relational causal knowledge graphs.

Turn cause-effect event graphs into knowledge graphs whose mediated
links carry qualifier pairs, train mediator-aware and baseline
embedding models on them, and evaluate causal prediction and
explanation with filtered link-prediction ranking.
"""

from .basemodels import BASE_KINDS, BaseModelSpec, init_base_model, score_batch
from .ceg import (
    CausalNetwork,
    CegEdge,
    CegNode,
    MediatedChain,
    RawCeg,
    Rejected,
    extract_mediated_chains,
    parse_ceg_corpus,
    preprocess,
    prune_corpus,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import (
    BuildError,
    CausalKgError,
    CheckpointError,
    EvalError,
    NumericError,
    ParseError,
    SamplingError,
    SplitError,
    ValidationError,
)
from .hyper import HyperConfig, init_hyper
from .kg import (
    KgSplit,
    KnowledgeGraph,
    QualifiedLink,
    build_kg,
    kg_stats,
    merge_split,
    parse_kg,
    serialize_kg,
    split_kg,
)
from .ranking import (
    EvalConfig,
    MetricsReport,
    Query,
    build_queries,
    evaluate,
    filtered_rank,
)
from .training import (
    BaseScorer,
    HyperScorer,
    TrainConfig,
    TrainResult,
    sample_negatives,
    train_base,
    train_hyper,
)
from .vocab import Vocabulary

__version__ = "0.1.0"

__all__ = [
    "BASE_KINDS",
    "BaseModelSpec",
    "BaseScorer",
    "BuildError",
    "CausalKgError",
    "CausalNetwork",
    "CegEdge",
    "CegNode",
    "Checkpoint",
    "CheckpointError",
    "EvalConfig",
    "EvalError",
    "HyperConfig",
    "HyperScorer",
    "KgSplit",
    "KnowledgeGraph",
    "MediatedChain",
    "MetricsReport",
    "NumericError",
    "ParseError",
    "QualifiedLink",
    "Query",
    "RawCeg",
    "Rejected",
    "SamplingError",
    "SplitError",
    "TrainConfig",
    "TrainResult",
    "ValidationError",
    "Vocabulary",
    "build_kg",
    "build_queries",
    "evaluate",
    "extract_mediated_chains",
    "filtered_rank",
    "init_base_model",
    "init_hyper",
    "kg_stats",
    "load_checkpoint",
    "merge_split",
    "parse_ceg_corpus",
    "parse_kg",
    "preprocess",
    "prune_corpus",
    "sample_negatives",
    "save_checkpoint",
    "score_batch",
    "serialize_kg",
    "split_kg",
    "train_base",
    "train_hyper",
]

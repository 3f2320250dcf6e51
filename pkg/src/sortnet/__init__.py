"""Learning to rank with a weight-shared neural comparator inside a sort."""
from .comparator import (
    ForwardTrace,
    NumericFault,
    ParameterGradient,
    PlainThreeLayerNet,
    Preference,
    WeightSharedComparator,
    apply_update,
    compare,
    forward,
    gradient,
    init_random,
    load,
    loss,
    save,
    symmetrize_network,
)
from .data import Document, QueryGroup, QueryNormalizer, assemble_folds, normalize_group, parse_letor
from .estimator import SortNetRanker
from .incremental import LabelOracle, RankingResult, run_sortnet, sort_with_comparator
from .metrics import average_precision, mean_average_precision, ndcg_at, precision_at
from .training import PairExample, PairSet, TrainConfig, build_pairs, pairwise_accuracy, train_and_validate

__all__ = [
    "Document",
    "ForwardTrace",
    "LabelOracle",
    "NumericFault",
    "PairExample",
    "PairSet",
    "ParameterGradient",
    "PlainThreeLayerNet",
    "Preference",
    "QueryGroup",
    "QueryNormalizer",
    "RankingResult",
    "SortNetRanker",
    "TrainConfig",
    "WeightSharedComparator",
    "apply_update",
    "assemble_folds",
    "average_precision",
    "build_pairs",
    "compare",
    "forward",
    "gradient",
    "init_random",
    "load",
    "loss",
    "mean_average_precision",
    "ndcg_at",
    "normalize_group",
    "pairwise_accuracy",
    "parse_letor",
    "precision_at",
    "run_sortnet",
    "save",
    "sort_with_comparator",
    "symmetrize_network",
    "train_and_validate",
]

__version__ = "0.1.0"

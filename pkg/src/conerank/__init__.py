"""Pairwise learning-to-rank by fitting a polyhedral cone to pair differences."""

from .core import (
    ConeBasis,
    HyperParams,
    PairSample,
    check_proper,
    empirical_risk,
    fold_in_exact,
    normalize_pair,
    pair_loss,
    query_loss,
    simplex_least_squares,
)
from .data import (
    FeatureStats,
    QueryGroup,
    SynthSpec,
    generate_all_pairs,
    generate_pairs,
    parse_letor,
    serialize_letor,
    standardize,
    synth_generate,
    write_letor,
)
from .errors import (
    ConeRankError,
    InvalidConfigError,
    InvalidInputError,
    InvalidModelError,
    LetorParseError,
    NumericalError,
)
from .metrics import EvalReport, QueryEval, average_precision, evaluate, ndcg_at_k
from .model import ConeModel, load_model, save_model
from .ranker import RankingResult, predict_pair, rank_dataset, rank_query
from .solver import (
    TrainConfig,
    TrainReport,
    basis_update,
    eg_fold_in,
    init_model,
    pair_coefficient_gradient,
    risk_basis_gradient,
    sg_fold_in,
    train,
    train_on_pairs,
)
from .stability import (
    FoldResult,
    StabilityReport,
    generalization_bound,
    loqo_experiment,
    spectral_norm,
    stability_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ConeBasis",
    "ConeModel",
    "ConeRankError",
    "EvalReport",
    "FeatureStats",
    "FoldResult",
    "HyperParams",
    "InvalidConfigError",
    "InvalidInputError",
    "InvalidModelError",
    "LetorParseError",
    "NumericalError",
    "PairSample",
    "QueryEval",
    "QueryGroup",
    "RankingResult",
    "StabilityReport",
    "SynthSpec",
    "TrainConfig",
    "TrainReport",
    "average_precision",
    "basis_update",
    "check_proper",
    "eg_fold_in",
    "empirical_risk",
    "evaluate",
    "fold_in_exact",
    "generalization_bound",
    "generate_all_pairs",
    "generate_pairs",
    "init_model",
    "load_model",
    "loqo_experiment",
    "ndcg_at_k",
    "normalize_pair",
    "pair_coefficient_gradient",
    "pair_loss",
    "parse_letor",
    "predict_pair",
    "query_loss",
    "rank_dataset",
    "rank_query",
    "risk_basis_gradient",
    "save_model",
    "serialize_letor",
    "sg_fold_in",
    "simplex_least_squares",
    "spectral_norm",
    "stability_bound",
    "standardize",
    "synth_generate",
    "train",
    "train_on_pairs",
    "write_letor",
]

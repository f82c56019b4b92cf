"""Hyperbolic translational knowledge-graph embeddings in the Poincare ball,
with filtered link-prediction evaluation, convex relation-region verification
and forward-chained rule materialization."""

from .data import DatasetBundle, DegreeReport, Triple, Vocabulary, load_bundle, load_triples
from .estimator import HyperKG
from .evaluation import EvalReport, evaluate, rank_query
from .geometry import (
    PermutationSpec,
    circ_permute,
    distance_grad,
    mobius_add,
    poincare_distance,
    project_to_radius,
    riemannian_scale,
)
from .model import ParameterStore, init_params, load_checkpoint, save_checkpoint, score_hyperkg, score_transe
from .rules import RuleKB, close, generate_wd_like
from .training import TrainConfig, TrainResult, train
from .verification import RelationRegion, check_locus_equivalence, region_from, translation_counterexamples

__version__ = "0.1.0"

__all__ = [
    "DatasetBundle",
    "DegreeReport",
    "EvalReport",
    "HyperKG",
    "ParameterStore",
    "PermutationSpec",
    "RelationRegion",
    "RuleKB",
    "TrainConfig",
    "TrainResult",
    "Triple",
    "Vocabulary",
    "check_locus_equivalence",
    "circ_permute",
    "close",
    "distance_grad",
    "evaluate",
    "generate_wd_like",
    "init_params",
    "load_bundle",
    "load_checkpoint",
    "load_triples",
    "mobius_add",
    "poincare_distance",
    "project_to_radius",
    "rank_query",
    "region_from",
    "riemannian_scale",
    "save_checkpoint",
    "score_hyperkg",
    "score_transe",
    "train",
    "translation_counterexamples",
    "__version__",
]

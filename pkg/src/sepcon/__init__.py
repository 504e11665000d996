"""Constructive separately continuous functions.

Build n-variable separately continuous functions with a prescribed diagonal
(given as an iterated-limit tower of continuous functions), extend functions
from parametrized subsets of products, and verify every property that can be
verified numerically at desk scale.
"""

from .space import BoxDomain, MetricModel, euclidean_box, interval, weighted_sup_model
from .expr import ContFn, Expr, SupportedFn, VectorFn
from .partition import partition_of_unity
from .tower import (
    BaireTower,
    EvalOutcome,
    IndexSchedule,
    RateCertificate,
    gallery,
    tower_eval,
)
from .diagonal import (
    RadiusSchedule,
    SepFn,
    build_diagonal_2,
    build_diagonal_n,
    schedule_from_lipschitz,
    sepfn_eval,
)

__all__ = [
    "BaireTower",
    "BoxDomain",
    "ContFn",
    "EvalOutcome",
    "Expr",
    "IndexSchedule",
    "MetricModel",
    "RadiusSchedule",
    "RateCertificate",
    "SepFn",
    "SupportedFn",
    "VectorFn",
    "build_diagonal_2",
    "build_diagonal_n",
    "euclidean_box",
    "gallery",
    "interval",
    "partition_of_unity",
    "schedule_from_lipschitz",
    "sepfn_eval",
    "tower_eval",
    "weighted_sup_model",
]

__version__ = "0.1.0"

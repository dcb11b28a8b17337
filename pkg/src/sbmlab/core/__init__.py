"""The block-model core: parameter and graph types, seeded sampling, label switching, and the A1-A4 checks.

Pure numpy. The public names are re-exported here so consumers can do
``from sbmlab.core import SbmParams, sample_graph``.
"""

from . import errors
from .assumptions import AssumptionReport, check_assumptions
from .graph import LabeledGraph, class_counts, empirical_alpha, validate_labels
from .params import SbmParams
from .rng import RngStreams, resolve_seed, streams
from .sampling import sample_batch, sample_graph
from .symmetry import Permutation, all_permutations, equivalence_class, label_error, param_distance, symmetry_group

__all__ = [
    "errors",
    "SbmParams",
    "LabeledGraph",
    "validate_labels",
    "class_counts",
    "empirical_alpha",
    "RngStreams",
    "streams",
    "resolve_seed",
    "sample_graph",
    "sample_batch",
    "Permutation",
    "all_permutations",
    "symmetry_group",
    "param_distance",
    "label_error",
    "equivalence_class",
    "AssumptionReport",
    "check_assumptions",
]

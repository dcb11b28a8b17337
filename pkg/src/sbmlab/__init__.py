"""
sbmlab: directed binary Stochastic Block Models.

Sample graphs from known parameters, fit parameters back by exact EM or
mean-field variational EM, recover them from edge-pattern moments, and run
the experiments that measure how well each of those works as n grows.

The most used names are re-exported here; the subpackages hold the rest.
"""

from .core import LabeledGraph, SbmParams, check_assumptions, param_distance, sample_graph, streams
from .core.errors import SbmError
from .inference import FitResult, exact_em_fit, posterior_table, vem_fit
from .moments import moments_analytic, moments_empirical, recover_from_moments

__version__ = "0.1.0"

__all__ = [
    "SbmParams",
    "LabeledGraph",
    "SbmError",
    "streams",
    "sample_graph",
    "check_assumptions",
    "param_distance",
    "FitResult",
    "posterior_table",
    "exact_em_fit",
    "vem_fit",
    "moments_analytic",
    "moments_empirical",
    "recover_from_moments",
]

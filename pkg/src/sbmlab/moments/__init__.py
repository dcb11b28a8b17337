"""Moment-based identification: edge-pattern moments and the recovery of (α, π) from them."""

from .estimate import MomentErrors, MomentSet, min_vertices, moments_analytic, moments_empirical
from .recover import RecoveryResult, recover_from_moments, recover_q2_n4

__all__ = [
    "MomentSet",
    "MomentErrors",
    "min_vertices",
    "moments_analytic",
    "moments_empirical",
    "RecoveryResult",
    "recover_from_moments",
    "recover_q2_n4",
]

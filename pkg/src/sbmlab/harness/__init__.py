"""Reproducible experiments: consistency sweeps, posterior concentration, and moment recovery."""

from .experiments import (
    ConcentrationSummary,
    MomentSummary,
    run_concentration_experiment,
    run_moment_experiment,
)
from .sweep import SweepConfig, SweepRow, SweepSummary, estimate_error_rate, run_consistency_sweep, summarize_sweep

__all__ = [
    "SweepConfig",
    "SweepRow",
    "SweepSummary",
    "run_consistency_sweep",
    "summarize_sweep",
    "estimate_error_rate",
    "ConcentrationSummary",
    "run_concentration_experiment",
    "MomentSummary",
    "run_moment_experiment",
]

"""The `FitResult` record shared by exact EM and variational EM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.params import SbmParams

#: Per-step slack allowed when checking that an objective trace ascends.
ASCENT_TOL = 1e-9


@dataclass
class FitResult:
    """
    The outcome of fitting block-model parameters to one graph.

    :ivar params: The estimated (α, π).
    :ivar objective_trace: The objective after every iteration, starting with
        its value at the initialization: L2 for exact EM, J for variational EM.
    :ivar iterations: Iterations run by the selected restart.
    :ivar restarts_used: Restarts run (1 for exact EM).
    :ivar converged: Whether the objective gain fell below ``tol`` before
        ``max_iter``.
    :ivar method: ``"exact-em"`` or ``"vem"``.
    :ivar tau: n×Q membership matrix: variational τ, or node posteriors
        P(Z_i = q | X) for exact EM.
    :ivar flags: Non-fatal conditions met while fitting (e.g. ``empty-block``).
    :ivar restart_objectives: Final objective of every restart, by index.
    """

    params: SbmParams
    objective_trace: list[float]
    iterations: int
    restarts_used: int
    converged: bool
    method: str
    tau: np.ndarray | None = None
    flags: list[str] = field(default_factory=list)
    restart_objectives: list[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        """The final objective value."""
        return self.objective_trace[-1]

    def labels(self) -> np.ndarray:
        """Maximum-membership labels (row argmax of ``tau``; lowest class on ties)."""
        if self.tau is None:
            raise ValueError("this fit carries no membership matrix")
        return np.argmax(self.tau, axis=1).astype(np.int64) if self.tau.size else np.zeros(0, dtype=np.int64)

    def is_monotone(self, tol: float = ASCENT_TOL) -> bool:
        """Whether the trace never drops by more than ``tol`` in one step."""
        trace = np.asarray(self.objective_trace, dtype=float)
        return bool(np.all(np.diff(trace) >= -tol)) if trace.size > 1 else True

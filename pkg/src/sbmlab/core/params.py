"""The `SbmParams` value type: group proportions α and connectivity matrix π."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

#: How far ``sum(alpha)`` may stray from 1.
ALPHA_SUM_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SbmParams:
    """
    Parameters θ = (α, π) of a directed binary stochastic block model.

    Vertex labels are drawn i.i.d. from ``alpha``; given labels ``q`` and ``l``
    the directed edge ``i -> j`` is present with probability ``pi[q, l]``.
    Instances are immutable: both arrays are read-only views, so a params
    object can be shared between threads.

    :ivar alpha: Length-Q vector of class proportions, strictly positive and
        summing to 1 within :data:`ALPHA_SUM_TOL`.
    :ivar pi: Q×Q matrix of edge probabilities in [0, 1].
    """

    alpha: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        alpha = _frozen(self.alpha)
        pi = _frozen(self.pi)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "pi", pi)

        if alpha.ndim != 1 or alpha.size < 1:
            raise ParameterError(f"alpha must be a non-empty vector, got shape {alpha.shape}")
        q = alpha.size
        if pi.shape != (q, q):
            raise ParameterError(f"pi must be {q}x{q} to match alpha, got shape {pi.shape}")
        if not np.all(np.isfinite(alpha)) or not np.all(np.isfinite(pi)):
            raise ParameterError("alpha and pi must be finite")
        if np.any(alpha <= 0):
            raise ParameterError(f"alpha entries must be strictly positive, got {alpha.tolist()}")
        if abs(alpha.sum() - 1.0) > ALPHA_SUM_TOL:
            raise ParameterError(f"alpha must sum to 1 (within {ALPHA_SUM_TOL}), got {alpha.sum()!r}")
        if np.any(pi < 0) or np.any(pi > 1):
            raise ParameterError("pi entries must lie in [0, 1]")

    @classmethod
    def from_lists(cls, alpha, pi, q: int | None = None) -> SbmParams:
        """
        Build params from plain lists, checking an explicit class count.

        :param alpha: Sequence of class proportions.
        :param pi: Nested sequence, the connectivity matrix.
        :param q: Declared class count (as in a params file); checked against
            the array shapes when given.
        :raises ParameterError: If the data violate any invariant.
        """
        params = cls(np.asarray(alpha, dtype=float), np.asarray(pi, dtype=float))
        if q is not None and q != params.q:
            raise ParameterError(f"declared q={q} but alpha has {params.q} entries")
        return params

    @classmethod
    def uniform(cls, pi) -> SbmParams:
        """Params with equal class proportions."""
        pi = np.asarray(pi, dtype=float)
        q = pi.shape[0]
        return cls(np.full(q, 1.0 / q), pi)

    @property
    def q(self) -> int:
        """The number of classes Q."""
        return int(self.alpha.size)

    @property
    def r(self) -> np.ndarray:
        """``pi @ alpha``: the probability of an edge leaving a vertex of each class."""
        return self.pi @ self.alpha

    def transposed(self) -> SbmParams:
        """The params of the graph with every edge reversed (π replaced by πᵗ)."""
        return SbmParams(self.alpha, self.pi.T)

    def is_close(self, other: SbmParams, atol: float = 1e-12) -> bool:
        """Entrywise comparison without any relabeling."""
        return (
            self.q == other.q
            and np.allclose(self.alpha, other.alpha, rtol=0, atol=atol)
            and np.allclose(self.pi, other.pi, rtol=0, atol=atol)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SbmParams):
            return NotImplemented
        return np.array_equal(self.alpha, other.alpha) and np.array_equal(self.pi, other.pi)

    def __hash__(self):
        return hash((self.alpha.tobytes(), self.pi.tobytes()))

    def __repr__(self):
        return f"SbmParams(alpha={self.alpha.tolist()}, pi={self.pi.tolist()})"

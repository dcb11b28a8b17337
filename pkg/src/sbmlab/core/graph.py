"""The `LabeledGraph` value type: an adjacency bit matrix plus optional true labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """
    A directed graph on ``n`` vertices with no self-loops.

    Labels are 0-based class indices in memory (files and the command line use
    1-based labels; see :mod:`sbmlab.serialize`).

    :ivar adjacency: n×n matrix of 0/1 entries (``uint8``) with a zero
        diagonal. ``adjacency[i, j] == 1`` means the edge ``i -> j`` exists.
    :ivar labels: Optional length-n vector of class indices in ``range(q)``;
        ``None`` when the true labels are hidden.
    :ivar q: The class count the labels refer to, or ``None`` when unknown.
    """

    adjacency: np.ndarray
    labels: np.ndarray | None = None
    q: int | None = None

    def __post_init__(self):
        x = np.asarray(self.adjacency)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise ParameterError(f"adjacency must be square, got shape {x.shape}")
        if x.size and not np.isin(x, (0, 1)).all():
            raise ParameterError("adjacency entries must be 0 or 1")
        if x.size and np.any(np.diagonal(x) != 0):
            raise ParameterError("adjacency must have a zero diagonal (no self-loops)")
        x = x.astype(np.uint8)
        x.setflags(write=False)
        object.__setattr__(self, "adjacency", x)

        if self.labels is not None:
            z = validate_labels(self.labels, x.shape[0], self.q)
            object.__setattr__(self, "labels", z)
            if self.q is None:
                object.__setattr__(self, "q", int(z.max()) + 1 if z.size else 1)

    @property
    def n(self) -> int:
        """The number of vertices."""
        return int(self.adjacency.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum())

    @property
    def density(self) -> float:
        """Fraction of the n(n-1) ordered vertex pairs that carry an edge."""
        pairs = self.n * (self.n - 1)
        return self.edge_count / pairs if pairs else 0.0

    def without_labels(self) -> LabeledGraph:
        """The same graph with its labels hidden."""
        return LabeledGraph(self.adjacency, None, self.q)

    def transposed(self) -> LabeledGraph:
        """The graph with every edge reversed."""
        return LabeledGraph(self.adjacency.T, self.labels, self.q)


def validate_labels(labels, n: int, q: int | None = None) -> np.ndarray:
    """
    Check a label vector and return it as a read-only ``int64`` array.

    :param labels: Sequence of 0-based class indices.
    :param n: The expected length.
    :param q: The class count, when known; entries must lie in ``range(q)``.
    :raises ShapeError: If the length is not ``n``.
    :raises ParameterError: If an entry is negative or not below ``q``.
    """
    z = np.array(labels, dtype=np.int64).reshape(-1)
    if z.size != n:
        raise ShapeError(f"expected {n} labels, got {z.size}")
    if z.size and z.min() < 0:
        raise ParameterError("labels must be non-negative class indices")
    if q is not None and z.size and z.max() >= q:
        raise ParameterError(f"label {int(z.max()) + 1} is out of range for q={q}")
    z.setflags(write=False)
    return z


def class_counts(labels, q: int) -> np.ndarray:
    """N_q(z): how many vertices carry each label."""
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=q)[:q]


def empirical_alpha(labels, q: int) -> np.ndarray:
    """Empirical class frequencies N_q(z)/n (all zeros for an empty vector)."""
    counts = class_counts(labels, q)
    n = counts.sum()
    return counts / n if n else np.zeros(q)

"""Seeded sampling of labeled block-model graphs."""

from __future__ import annotations

import numpy as np

from .graph import LabeledGraph
from .params import SbmParams
from .rng import RngStreams, streams


def sample_labels(params: SbmParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. labels from ``params.alpha``."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.choice(params.q, size=n, p=params.alpha).astype(np.int64)


def sample_edges(params: SbmParams, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Draw the adjacency matrix given labels.

    One uniform per ordered pair, row-major; the edge ``i -> j`` is present
    when its uniform falls below ``pi[z_i, z_j]``. Uniforms lie in [0, 1), so
    ``pi == 1`` always fires and ``pi == 0`` never does.
    """
    n = labels.size
    coins = rng.random((n, n))
    x = (coins < params.pi[np.ix_(labels, labels)]).astype(np.uint8)
    np.fill_diagonal(x, 0)
    return x


def sample_from_streams(params: SbmParams, n: int, rng: RngStreams) -> LabeledGraph:
    """Sample a graph from an explicit stream family (see :mod:`sbmlab.core.rng`)."""
    labels = sample_labels(params, n, rng.labels)
    return LabeledGraph(sample_edges(params, labels, rng.edges), labels, params.q)


def sample_graph(params: SbmParams, n: int, seed: int) -> LabeledGraph:
    """
    Sample a block-model graph together with its true labels.

    Labels are i.i.d. multinomial(α); given labels, each ordered pair
    ``i != j`` carries an edge independently with probability
    ``pi[z_i, z_j]``. The result is a deterministic function of
    ``(params, n, seed)``.

    :param params: Validated model parameters.
    :param n: Number of vertices (``n == 0`` gives the empty graph).
    :param seed: Non-negative root seed.
    :raises ValueError: If ``n`` or ``seed`` is negative.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    return sample_from_streams(params, n, streams(seed))


def sample_batch(params: SbmParams, n: int, count: int, rng: RngStreams) -> tuple[np.ndarray, np.ndarray]:
    """
    Draw ``count`` independent graphs on ``n`` vertices at once.

    :return: ``(labels, adjacency)`` of shapes ``(count, n)`` and
        ``(count, n, n)``; adjacency is boolean with a zero diagonal.
    """
    labels = rng.labels.choice(params.q, size=(count, n), p=params.alpha).astype(np.int64)
    coins = rng.edges.random((count, n, n))
    probs = params.pi[labels[:, :, None], labels[:, None, :]]
    x = coins < probs
    x[:, np.arange(n), np.arange(n)] = False
    return labels, x

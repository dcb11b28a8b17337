"""Seeded, versioned random streams.

Every random draw in sbmlab comes from a :class:`numpy.random.Generator` over
``PCG64``, derived from one integer seed through :class:`numpy.random.SeedSequence`.
The splitting rule is fixed and versioned by :data:`STREAM_VERSION`; changing
it changes every sampled graph, so it must be bumped together with any change
below.

Stream layout (version 1), for a root ``SeedSequence(seed)``:

- ``labels``: spawn key ``(0,)``. Draws the n class labels, one categorical
  draw per vertex in vertex order.
- ``edges``: spawn key ``(1,)``. Draws one uniform per ordered vertex pair in
  row-major order, so the pair ``(i, j)`` always consumes the uniform at
  position ``i * n + j`` of this stream (diagonal positions are drawn and
  discarded). A pair's coin therefore depends only on ``(seed, n, i, j)``,
  and :meth:`RngStreams.edge_coin` reads it directly by advancing the
  ``PCG64`` state ``i * n + j`` draws, without sampling the rest of the graph.
- ``restart(k)``: spawn key ``(2, k)``. Initialization of the k-th
  variational restart.
- ``graph(g)``: spawn key ``(3, g)``. Root of the g-th independent graph in a
  Monte-Carlo batch; its own ``labels``/``edges`` follow the rule above.
- ``cell(*key)``: spawn key ``(4, *key)``. Root for one harness cell.
- ``orderings``: spawn key ``(5,)``. Random vertex relabelings used to
  average empirical moments over orderings.

Batched Monte-Carlo sampling (:func:`sbmlab.core.sampling.sample_batch`)
draws a whole batch of graphs from one ``graph(b)`` root: all labels of the
batch from its ``labels`` stream, then all edge uniforms, graph by graph in
row-major order, from its ``edges`` stream.

Streams never share state, so concurrent work seeded from distinct keys is
reproducible regardless of scheduling.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

#: Name of the bit generator every stream uses.
BIT_GENERATOR = "PCG64"

#: Version of the stream-splitting rule documented above.
STREAM_VERSION = 1

#: Environment variable consulted when a command is given no seed at all.
SEED_ENV = "SBM_LAB_SEED"

_LABELS, _EDGES, _RESTART, _GRAPH, _CELL, _ORDERINGS = range(6)


@dataclass(frozen=True)
class RngStreams:
    """
    The named sub-streams derived from one seed.

    :ivar entropy: The root seed.
    :ivar key: The spawn key of this root (empty for a top-level seed).
    """

    entropy: int
    key: tuple[int, ...] = ()

    def _child(self, *key: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.entropy, spawn_key=(*self.key, *key))

    def _generator(self, *key: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._child(*key)))

    @property
    def labels(self) -> np.random.Generator:
        return self._generator(_LABELS)

    @property
    def edges(self) -> np.random.Generator:
        return self._generator(_EDGES)

    def edge_coin(self, n: int, i: int, j: int) -> float:
        """
        The uniform the ordered pair ``(i, j)`` of an n-vertex graph is sampled with.

        :raises ValueError: If ``(i, j)`` is not a pair of distinct vertices.
        """
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"({i}, {j}) is not an ordered pair of distinct vertices of an {n}-vertex graph")
        bit_generator = np.random.PCG64(self._child(_EDGES))
        bit_generator.advance(i * n + j)
        return float(np.random.Generator(bit_generator).random())

    @property
    def orderings(self) -> np.random.Generator:
        return self._generator(_ORDERINGS)

    def restart(self, k: int) -> np.random.Generator:
        return self._generator(_RESTART, k)

    def graph(self, g: int) -> RngStreams:
        return RngStreams(self.entropy, (*self.key, _GRAPH, g))

    def cell(self, *key: int) -> RngStreams:
        return RngStreams(self.entropy, (*self.key, _CELL, *key))


def streams(seed: int) -> RngStreams:
    """
    Return the stream family for ``seed``.

    :raises ValueError: If ``seed`` is negative (``SeedSequence`` rejects it).
    """
    if seed < 0:
        raise ValueError(f"seeds must be non-negative, got {seed}")
    return RngStreams(int(seed))


def resolve_seed(explicit: int | None, configured: int | None = None, environ=None) -> int:
    """
    Pick the seed for a command: the flag, then ``runtime.seed``, then ``SBM_LAB_SEED``, then 0.

    :param explicit: The ``--seed`` value, if given.
    :param configured: The resolved ``runtime.seed`` setting, if any.
    :param environ: Environment to read (defaults to :data:`os.environ`).
    :raises ValueError: If ``SBM_LAB_SEED`` is not an integer.
    """
    if explicit is not None:
        return explicit
    if configured is not None:
        return configured
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise ValueError(f"{SEED_ENV}={raw!r} is not an integer") from e

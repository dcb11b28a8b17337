"""
Edge-pattern moments, computed exactly from parameters or estimated by Monte Carlo.

With r = π·α (the out-degree profile of each class), the moments are the
probabilities of fixed edge patterns on the first vertices of a graph:

- ``u[i]``: the first row starts with ``i`` ones, ``X[0,1] = ... = X[0,i] = 1``.
  Equal to ``sum_k α_k r_k^i``.
- ``bigU[i, j]``: the first row starts with ``i + 1`` ones and the second row
  ends with ``j`` ones. Equal to ``sum_{k,l} r_k^i α_k π_kl α_l r_l^j``.
- ``c``: the 2-cycle ``X[0,1] = X[1,0] = 1``, ``sum_{k,l} α_k α_l π_kl π_lk``.
- ``d``: the 3-cycle ``X[0,1] = X[1,2] = X[2,0] = 1``,
  ``trace((diag(α) π)^3)``. Estimated from graphs for any two-class model;
  computed exactly only for the balanced affiliation model, α = (1/2, 1/2)
  and π = [[a, b], [b, a]].

All of them need ``n >= 2Q`` vertices. The ``column`` orientation computes
the same patterns on the transposed graph, replacing r by πᵗ·α.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core.errors import ParameterError, SizeLimitError
from ..core.params import SbmParams
from ..core.rng import RngStreams, streams
from ..core.sampling import sample_batch

logger = logging.getLogger(__name__)

ORIENTATIONS = ("row", "column")

#: Largest number of adjacency entries drawn in one Monte-Carlo batch.
BATCH_ENTRIES = 2**22

#: Slack on the [0, 1] box and on monotonicity of ``u``.
MOMENT_TOL = 1e-12


@dataclass(frozen=True)
class MomentErrors:
    """Binomial standard errors ``sqrt(p(1 - p)/G)`` of an empirical :class:`MomentSet`."""

    u: np.ndarray
    bigU: np.ndarray
    c: float
    d: float | None = None


@dataclass(frozen=True, eq=False)
class MomentSet:
    """
    The moments the recovery algorithms read.

    :ivar q: Class count.
    :ivar u: ``u[0..2Q-1]``; ``u[0] == 1`` and the sequence is non-increasing.
    :ivar bigU: Q×Q matrix ``U[i, j]``.
    :ivar c: 2-cycle probability.
    :ivar d: 3-cycle probability, two classes only.
    :ivar source: ``"analytic"`` or ``"empirical"``.
    :ivar sample_count: Graphs behind an empirical set.
    :ivar stderr: Standard errors of an empirical set.
    :ivar orientation: ``"row"`` (r = π·α) or ``"column"`` (r = πᵗ·α).
    """

    q: int
    u: np.ndarray
    bigU: np.ndarray
    c: float | None = None
    d: float | None = None
    source: str = "analytic"
    sample_count: int | None = None
    stderr: MomentErrors | None = None
    orientation: str = "row"

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        big_u = np.array(self.bigU, dtype=float)
        if u.shape != (2 * self.q,):
            raise ParameterError(f"u must have 2Q = {2 * self.q} entries, got {u.size}")
        if big_u.shape != (self.q, self.q):
            raise ParameterError(f"U must be {self.q}x{self.q}, got shape {big_u.shape}")
        if abs(u[0] - 1.0) > MOMENT_TOL:
            raise ParameterError(f"u[0] must be 1, got {u[0]!r}")
        scalars = [v for v in (self.c, self.d) if v is not None]
        every = np.concatenate([u, big_u.reshape(-1), np.asarray(scalars, dtype=float)])
        if not np.all(np.isfinite(every)) or every.min() < -MOMENT_TOL or every.max() > 1 + MOMENT_TOL:
            raise ParameterError("moments are probabilities and must lie in [0, 1]")
        if np.any(np.diff(u) > MOMENT_TOL):
            raise ParameterError("u must be non-increasing")
        if self.orientation not in ORIENTATIONS:
            raise ParameterError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        if self.source not in ("analytic", "empirical"):
            raise ParameterError(f"unknown moment source {self.source!r}")
        u.setflags(write=False)
        big_u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "bigU", big_u)

    def variance_stderr(self) -> float:
        """Standard error of ``u[2] - u[1]^2`` (0 for analytic sets)."""
        if self.stderr is None or self.q < 2:
            return 0.0
        se = self.stderr.u
        return float(np.hypot(se[2], 2.0 * self.u[1] * se[1]))


def min_vertices(q: int) -> int:
    """The smallest graph on which every moment pattern fits: 2Q vertices."""
    return 2 * q


def _oriented(params: SbmParams, orientation: str) -> SbmParams:
    if orientation not in ORIENTATIONS:
        raise ParameterError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    return params.transposed() if orientation == "column" else params


def _balanced_affiliation(alpha: np.ndarray, pi: np.ndarray) -> bool:
    if alpha.size != 2:
        return False
    return bool(
        np.allclose(alpha, 0.5, rtol=0.0, atol=MOMENT_TOL)
        and abs(pi[0, 1] - pi[1, 0]) <= MOMENT_TOL
        and abs(pi[0, 0] - pi[1, 1]) <= MOMENT_TOL
    )


def moments_analytic(params: SbmParams, orientation: str = "row") -> MomentSet:
    """Exact moments of a parameter set; ``d`` is left ``None`` outside the balanced affiliation model."""
    oriented = _oriented(params, orientation)
    q = oriented.q
    alpha, pi = oriented.alpha, oriented.pi
    r = oriented.r
    powers = r[None, :] ** np.arange(2 * q)[:, None]
    u = powers @ alpha
    weighted = (alpha[:, None] * pi) * alpha[None, :]
    big_u = powers[:q] @ weighted @ powers[:q].T
    c = float(alpha @ (pi * pi.T) @ alpha)
    d = None
    if _balanced_affiliation(alpha, pi):
        d = float(np.trace(np.linalg.matrix_power(alpha[:, None] * pi, 3)))
    return MomentSet(
        q=q,
        u=np.clip(u, 0.0, 1.0),
        bigU=np.clip(big_u, 0.0, 1.0),
        c=min(max(c, 0.0), 1.0),
        d=None if d is None else min(max(d, 0.0), 1.0),
        source="analytic",
        orientation=orientation,
    )


def _pattern_counts(x: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray, int, int]:
    """
    Count the moment patterns over a stack of boolean adjacency matrices.

    :return: ``(u_counts, U_counts, c_count, d_count)``; ``u_counts[0]`` is the
        number of matrices.
    """
    n = x.shape[1]
    prefix = np.logical_and.accumulate(x[:, 0, 1 : 2 * q], axis=1)
    u_counts = np.concatenate([[x.shape[0]], prefix.sum(axis=0)])

    ones = np.ones((x.shape[0], 1), dtype=bool)
    suffix = np.logical_and.accumulate(x[:, 1, n - 1 : n - q : -1], axis=1) if q > 1 else ones[:, :0]
    row_a = prefix[:, :q]
    row_b = np.concatenate([ones, suffix], axis=1)
    big_u_counts = np.einsum("gi,gj->ij", row_a.astype(np.int64), row_b.astype(np.int64))

    c_count = int(np.sum(x[:, 0, 1] & x[:, 1, 0]))
    d_count = int(np.sum(x[:, 0, 1] & x[:, 1, 2] & x[:, 2, 0])) if n >= 3 else 0
    return u_counts, big_u_counts, c_count, d_count


def _relabel(x: np.ndarray, rng: np.random.Generator, k: int) -> np.ndarray:
    """``k`` uniformly random vertex relabelings of every matrix in ``x``."""
    g, n, _ = x.shape
    perms = np.argsort(rng.random((g, k, n)), axis=2)
    rows = perms[:, :, :, None]
    cols = perms[:, :, None, :]
    return x[np.arange(g)[:, None, None, None], rows, cols].reshape(g * k, n, n)


def moments_empirical(
    params: SbmParams,
    graphs: int,
    n: int,
    seed: int | RngStreams,
    *,
    orientation: str = "row",
    average_orderings: int = 0,
    threads: int = 1,
) -> MomentSet:
    """
    Monte-Carlo moments from ``graphs`` independent sampled graphs.

    Each moment is the frequency of its pattern on the first vertices of the
    sampled graphs. With ``average_orderings = K > 0``, each graph is also
    relabeled by K random vertex permutations and the pattern frequencies are
    averaged over them, which lowers the variance without biasing the estimate.
    Standard errors are ``sqrt(p(1 - p)/graphs)`` either way.

    Graphs are drawn in batches (see :mod:`sbmlab.core.rng`); counts are
    integers summed in batch order, so the result does not depend on
    ``threads``.

    :raises ParameterError: If ``graphs`` < 1 or ``average_orderings`` < 0.
    :raises SizeLimitError: If ``n < 2Q``.
    """
    q = params.q
    if graphs < 1:
        raise ParameterError(f"at least one graph is needed to estimate moments, got {graphs}")
    if average_orderings < 0:
        raise ParameterError(f"average_orderings must be non-negative, got {average_orderings}")
    if n < min_vertices(q):
        raise SizeLimitError(f"moments for Q={q} need n >= 2Q = {min_vertices(q)} vertices, got n={n}")
    _oriented(params, orientation)

    batch = max(1, min(graphs, BATCH_ENTRIES // (n * n)))
    spans = [(b, start, min(start + batch, graphs)) for b, start in enumerate(range(0, graphs, batch))]
    root = seed if isinstance(seed, RngStreams) else streams(seed)

    def count(span):
        b, start, stop = span
        rng = root.graph(b)
        _, x = sample_batch(params, n, stop - start, rng)
        if orientation == "column":
            x = x.transpose(0, 2, 1)
        if average_orderings:
            x = _relabel(x, rng.orderings, average_orderings)
        return _pattern_counts(x, q)

    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(count, spans))
    else:
        parts = [count(span) for span in spans]

    u_counts = sum(p[0] for p in parts)
    big_u_counts = sum(p[1] for p in parts)
    c_count = sum(p[2] for p in parts)
    d_count = sum(p[3] for p in parts)
    samples = graphs * max(average_orderings, 1)
    logger.info("moments_empirical: %d graphs on %d vertices, %d pattern samples", graphs, n, samples)

    u = u_counts / samples
    big_u = big_u_counts / samples
    c = c_count / samples
    d = d_count / samples if q == 2 else None

    def se(p):
        return np.sqrt(p * (1.0 - p) / graphs)

    return MomentSet(
        q=q,
        u=u,
        bigU=big_u,
        c=float(c),
        d=d,
        source="empirical",
        sample_count=graphs,
        stderr=MomentErrors(se(u), se(big_u), float(se(c)), None if d is None else float(se(d))),
        orientation=orientation,
    )

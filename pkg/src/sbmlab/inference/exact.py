"""
Exact likelihoods, posteriors and EM by enumerating every label vector.

The marginal log-likelihood L2 sums over all Q^n label vectors, so everything
here is exponential in n and guarded by an enumeration cap (2^24 vectors by
default). Vectors are enumerated in mixed-radix order, vertex 0 being the most
significant digit, and processed in fixed-size chunks. Chunks may run on
worker threads, but results are always assembled in chunk order, so the
output is bit-identical for any thread count.

Conventions:

- ``0 * log 0 = 0`` throughout (``scipy.special.xlogy``), so π entries equal
  to 0 or 1 only matter when an observed pair contradicts them, in which case
  the complete-data log-likelihood is ``-inf``.
- Log-sum-exp uses the max-shift form (``scipy.special.logsumexp``); L1 reaches
  about ``-n^2 log(1/ζ)`` and naive exponentiation underflows.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, rel_entr, xlogy

from ..core.errors import DegenerateModelError, ParameterError, ShapeError, SizeLimitError
from ..core.graph import LabeledGraph, class_counts, validate_labels
from ..core.params import SbmParams
from ..core.symmetry import DEFAULT_SYMMETRY_TOL, equivalence_class
from .results import FitResult

logger = logging.getLogger(__name__)

#: Largest number of label vectors (Q^n) any enumeration may visit.
DEFAULT_ENUMERATION_CAP = 2**24

#: Label vectors per enumeration chunk.
DEFAULT_CHUNK_SIZE = 4096

#: π value substituted for a block with no expected pairs in the M-step.
EMPTY_BLOCK_PI = 0.5

#: Smallest class proportion an M-step may return.
ALPHA_FLOOR = 1e-300

#: Tolerance on the posterior normalization.
POSTERIOR_SUM_TOL = 1e-10

#: Flag recorded when the true labelling has no posterior mass.
ZERO_MASS_FLAG = "zero-mass-truth"

#: Flag recorded when a KL divergence is infinite.
SUPPORT_FLAG = "kl-support"


# --- Enumeration -----------------------------------------------------------


def enumeration_size(n: int, q: int) -> int:
    """Q^n, the number of label vectors."""
    return q**n


def check_enumerable(n: int, q: int, cap: int = DEFAULT_ENUMERATION_CAP) -> int:
    """
    Return Q^n, or raise when it exceeds ``cap``.

    :raises SizeLimitError: If Q^n > cap.
    """
    size = enumeration_size(n, q)
    if size > cap:
        raise SizeLimitError(f"Q^n = {q}^{n} = {size} label vectors exceeds the enumeration cap {cap}")
    return size


def label_vectors(n: int, q: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """
    The label vectors with enumeration index in ``[start, stop)``, one per row.

    Index ``k`` maps to the base-Q digits of ``k``, most significant first.
    """
    stop = enumeration_size(n, q) if stop is None else stop
    index = np.arange(start, stop, dtype=np.int64)
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (index[:, None] // powers[None, :]) % q


def label_index(z, q: int) -> int:
    """The enumeration index of a label vector (inverse of :func:`label_vectors`)."""
    index = 0
    for label in np.asarray(z, dtype=np.int64):
        index = index * q + int(label)
    return index


def _chunks(size: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(start, min(start + chunk_size, size)) for start in range(0, size, chunk_size)]


def _map_chunks(fn, size: int, chunk_size: int, threads: int) -> list:
    """Apply ``fn(start, stop)`` to every chunk, returning results in chunk order."""
    spans = _chunks(size, chunk_size)
    if threads <= 1 or len(spans) == 1:
        return [fn(start, stop) for start, stop in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda span: fn(*span), spans))


def _one_hot(z: np.ndarray, q: int) -> np.ndarray:
    """(m, n) labels -> (m, n, q) indicator array."""
    return (z[..., None] == np.arange(q)).astype(float)


def _block_counts(x: np.ndarray, z: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Edge and pair counts per block for a batch of label vectors.

    :param x: n×n adjacency as floats.
    :param z: (m, n) label vectors.
    :return: ``(edges, pairs)``, both (m, q, q): ``edges[k, q, l]`` counts the
        ordered pairs i != j with labels (q, l) carrying an edge, ``pairs`` all
        such ordered pairs.
    """
    onehot = _one_hot(z, q)
    edges = np.matmul(onehot.transpose(0, 2, 1), np.matmul(x, onehot))
    sizes = onehot.sum(axis=1)
    pairs = sizes[:, :, None] * sizes[:, None, :] - np.einsum("mq,ql->mql", sizes, np.eye(q))
    return edges, pairs


def _complete_from_counts(edges: np.ndarray, pairs: np.ndarray, pi: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        terms = xlogy(edges, pi) + xlogy(pairs - edges, 1.0 - pi)
    return terms.sum(axis=(-2, -1))


# --- Likelihoods -----------------------------------------------------------


def complete_loglik(graph: LabeledGraph, z, pi) -> float:
    """
    The complete-data log-likelihood L1(X; z, π).

    ``sum over i != j of X_ij log π[z_i, z_j] + (1 - X_ij) log(1 - π[z_i, z_j])``
    with ``0 log 0 = 0``. Returns ``-inf`` when an observed pair contradicts a
    0 or 1 entry of π; that is a value, not an error.

    :raises ShapeError: If ``z`` does not have n entries.
    """
    pi = np.asarray(pi, dtype=float)
    q = pi.shape[0]
    z = validate_labels(z, graph.n, q)
    edges, pairs = _block_counts(graph.adjacency.astype(float), z[None, :], q)
    return float(_complete_from_counts(edges, pairs, pi)[0])


def prior_loglik(z, alpha) -> float:
    """log P[Z = z] = sum_i log α[z_i]."""
    alpha = np.asarray(alpha, dtype=float)
    z = np.asarray(z, dtype=np.int64)
    with np.errstate(divide="ignore"):
        return float(np.log(alpha)[z].sum()) if z.size else 0.0


def normalized_contrast(graph: LabeledGraph, z, pi) -> float:
    """φ_n(z, π) = L1(X; z, π) / (n(n-1)); 0 when there are no pairs."""
    pairs = graph.n * (graph.n - 1)
    return complete_loglik(graph, z, pi) / pairs if pairs else 0.0


def expected_contrast(z, pi, z_star, pi_star) -> float:
    """
    Φ_n(z, π): the expectation of φ_n(z, π) when the graph is drawn given Z = z*.

    ``(1/(n(n-1))) sum over i != j of π*[z*_i, z*_j] log π[z_i, z_j]
    + (1 - π*[z*_i, z*_j]) log(1 - π[z_i, z_j])``.
    """
    z = np.asarray(z, dtype=np.int64)
    z_star = np.asarray(z_star, dtype=np.int64)
    if z.shape != z_star.shape:
        raise ShapeError(f"label vectors differ in length: {z.size} vs {z_star.size}")
    n = z.size
    if n < 2:
        return 0.0
    p_true = np.asarray(pi_star, dtype=float)[np.ix_(z_star, z_star)]
    p_model = np.asarray(pi, dtype=float)[np.ix_(z, z)]
    off = ~np.eye(n, dtype=bool)
    with np.errstate(divide="ignore"):
        terms = xlogy(p_true, p_model) + xlogy(1.0 - p_true, 1.0 - p_model)
    return float(terms[off].sum() / (n * (n - 1)))


def log_posterior_ratio(graph: LabeledGraph, z, z_ref, params: SbmParams) -> float:
    """
    log P(Z = z | X) - log P(Z = z_ref | X), without enumeration.

    The marginal likelihood cancels, leaving a difference of complete-data
    and prior log-likelihoods, so this works at any n.
    """
    return (complete_loglik(graph, z, params.pi) + prior_loglik(z, params.alpha)) - (
        complete_loglik(graph, z_ref, params.pi) + prior_loglik(z_ref, params.alpha)
    )


def _log_weights(
    graph: LabeledGraph,
    params: SbmParams,
    cap: int,
    chunk_size: int,
    threads: int,
) -> np.ndarray:
    """L1 + log prior for every label vector, in enumeration order."""
    size = check_enumerable(graph.n, params.q, cap)
    x = graph.adjacency.astype(float)
    with np.errstate(divide="ignore"):
        log_alpha = np.log(params.alpha)

    def chunk(start, stop):
        z = label_vectors(graph.n, params.q, start, stop)
        edges, pairs = _block_counts(x, z, params.q)
        prior = log_alpha[z].sum(axis=1) if graph.n else np.zeros(stop - start)
        return _complete_from_counts(edges, pairs, params.pi) + prior

    return np.concatenate(_map_chunks(chunk, size, chunk_size, threads))


def marginal_loglik(
    graph: LabeledGraph,
    params: SbmParams,
    cap: int = DEFAULT_ENUMERATION_CAP,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    threads: int = 1,
) -> float:
    """
    The marginal log-likelihood L2(X; α, π), by exhaustive enumeration.

    ``log sum over z of exp(L1(X; z, π) + log P[Z = z])``. Returns ``-inf``
    when every label vector is impossible.

    :raises SizeLimitError: If Q^n exceeds ``cap``.
    """
    with np.errstate(divide="ignore"):
        return float(logsumexp(_log_weights(graph, params, cap, chunk_size, threads)))


# --- Posterior -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    """
    The exact posterior P(Z = · | X) over all Q^n label vectors.

    :ivar n: Vertex count.
    :ivar q: Class count.
    :ivar probs: Length-Q^n probabilities in enumeration order
        (see :func:`label_vectors`); non-negative, summing to 1.
    :ivar log_marginal: L2 at the parameters that produced the table, when known.
    """

    n: int
    q: int
    probs: np.ndarray
    log_marginal: float | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).reshape(-1)
        if probs.size != enumeration_size(self.n, self.q):
            raise ShapeError(f"a posterior over {self.q}^{self.n} vectors needs that many entries, got {probs.size}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ParameterError("posterior probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > POSTERIOR_SUM_TOL:
            raise ParameterError(f"posterior probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, z) -> float:
        return float(self.probs[label_index(z, self.q)])

    def __len__(self):
        return self.probs.size

    def entries(self, nonzero: bool = False) -> Iterator[tuple[tuple[int, ...], float]]:
        """Yield ``(label vector, probability)`` in enumeration order."""
        for start, stop in _chunks(self.probs.size, DEFAULT_CHUNK_SIZE):
            for z, p in zip(label_vectors(self.n, self.q, start, stop), self.probs[start:stop], strict=True):
                if p > 0 or not nonzero:
                    yield tuple(int(v) for v in z), float(p)

    def marginals(self) -> np.ndarray:
        """n×Q node posteriors P(Z_i = q | X)."""
        out = np.zeros((self.n, self.q))
        for start, stop in _chunks(self.probs.size, DEFAULT_CHUNK_SIZE):
            z = label_vectors(self.n, self.q, start, stop)
            out += np.einsum("m,miq->iq", self.probs[start:stop], _one_hot(z, self.q))
        return out

    def map_labels(self) -> np.ndarray:
        """The most probable label vector (lowest index on ties)."""
        return label_vectors(self.n, self.q, int(np.argmax(self.probs)), int(np.argmax(self.probs)) + 1)[0]


def posterior_table(
    graph: LabeledGraph,
    params: SbmParams,
    cap: int = DEFAULT_ENUMERATION_CAP,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    threads: int = 1,
) -> PosteriorTable:
    """
    The exact posterior over label vectors.

    Entries are ``exp(L1 + log prior - L2)``, so the normalizing constant is
    ``exp(marginal_loglik)``.

    :raises SizeLimitError: If Q^n exceeds ``cap``.
    :raises DegenerateModelError: If every label vector has probability zero.
    """
    weights = _log_weights(graph, params, cap, chunk_size, threads)
    with np.errstate(divide="ignore"):
        log_marginal = float(logsumexp(weights))
    if not np.isfinite(log_marginal):
        raise DegenerateModelError("every label vector is impossible under these parameters (all weights are -inf)")
    probs = np.exp(weights - log_marginal)
    return PosteriorTable(graph.n, params.q, probs / probs.sum(), log_marginal)


def class_mass(table: PosteriorTable, z_star, pi, tol: float = DEFAULT_SYMMETRY_TOL) -> float:
    """Posterior mass of the equivalence class [z*] under the symmetry group of π."""
    z_star = validate_labels(z_star, table.n, table.q)
    return float(sum(table[z] for z in equivalence_class(z_star, pi, tol)))


def posterior_ratio_stat(
    table: PosteriorTable, z_star, pi, tol: float = DEFAULT_SYMMETRY_TOL, flags: list[str] | None = None
) -> float:
    """
    Sum over classes [z] != [z*] of P([z] | X) / P([z*] | X).

    Classes are taken under the symmetry group of π. A zero-mass z* gives
    ``+inf``, not an error, and appends :data:`ZERO_MASS_FLAG` to ``flags``.
    """
    mass = class_mass(table, z_star, pi, tol)
    if mass <= 0:
        if flags is not None:
            flags.append(ZERO_MASS_FLAG)
        logger.warning("posterior_ratio_stat: the true label class has zero posterior mass; reporting +inf")
        return float("inf")
    return max(0.0, 1.0 - mass) / mass


def alpha_deviation_bound(table: PosteriorTable, z_star) -> tuple[float, float, bool]:
    """
    Check ``max_q |α̂_q - N_q(z*)/n| <= 2 P(Z != z* | X)``.

    α̂_q is the posterior class frequency ``(1/n) sum_i P(Z_i = q | X)``, the
    maximum-likelihood α when the table is evaluated at the MLE.

    :return: ``(lhs, rhs, ok)``.
    """
    z_star = validate_labels(z_star, table.n, table.q)
    if table.n == 0:
        return 0.0, 0.0, True
    alpha_hat = table.marginals().mean(axis=0)
    lhs = float(np.max(np.abs(alpha_hat - class_counts(z_star, table.q) / table.n)))
    rhs = 2.0 * max(0.0, 1.0 - table[z_star])
    return lhs, rhs, lhs <= rhs + 1e-12


def product_probs(tau: np.ndarray, chunk_size: int = DEFAULT_CHUNK_SIZE) -> np.ndarray:
    """D_τ(z) = prod_i τ[i, z_i] for every label vector, in enumeration order."""
    tau = np.asarray(tau, dtype=float)
    n, q = tau.shape
    rows = np.arange(n)
    with np.errstate(divide="ignore"):
        log_tau = np.log(tau)
    parts = [
        np.exp(log_tau[rows, label_vectors(n, q, start, stop)].sum(axis=1))
        for start, stop in _chunks(enumeration_size(n, q), chunk_size)
    ]
    return np.concatenate(parts)


def kl_divergence(d, p: PosteriorTable, flags: list[str] | None = None) -> float:
    """
    K(d, p) = sum over z of d(z) log(d(z) / p(z)), with 0 log 0 = 0.

    :param d: A product distribution (a :class:`~sbmlab.inference.variational.TauMatrix`
        or an n×Q array of row probabilities) or another :class:`PosteriorTable`.
    :param p: The reference posterior.
    :param flags: When given, :data:`SUPPORT_FLAG` is appended on a support
        violation.
    :return: The divergence, ``>= 0``; ``+inf`` when d puts mass where p has
        none.
    :raises ShapeError: If the two distributions are over different spaces.
    """
    if isinstance(d, PosteriorTable):
        if (d.n, d.q) != (p.n, p.q):
            raise ShapeError(f"cannot compare posteriors over {d.q}^{d.n} and {p.q}^{p.n} vectors")
        d_probs = d.probs
    else:
        tau = np.asarray(getattr(d, "values", d), dtype=float)
        if tau.shape != (p.n, p.q):
            raise ShapeError(f"tau has shape {tau.shape}, expected {(p.n, p.q)}")
        d_probs = product_probs(tau)
    total = float(rel_entr(d_probs, p.probs).sum())
    if np.isinf(total):
        if flags is not None:
            flags.append(SUPPORT_FLAG)
        logger.warning("kl_divergence: support of d is not contained in the support of p; reporting +inf")
        return float("inf")
    return max(total, 0.0)


# --- Exact EM --------------------------------------------------------------


def _expected_counts(
    graph: LabeledGraph, table: PosteriorTable, chunk_size: int, threads: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Posterior expectations of block edge counts, block pair counts, and node memberships."""
    x = graph.adjacency.astype(float)
    q = table.q

    def chunk(start, stop):
        z = label_vectors(table.n, q, start, stop)
        weights = table.probs[start:stop]
        edges, pairs = _block_counts(x, z, q)
        return (
            np.einsum("m,mql->ql", weights, edges),
            np.einsum("m,mql->ql", weights, pairs),
            np.einsum("m,miq->iq", weights, _one_hot(z, q)),
        )

    parts = _map_chunks(chunk, table.probs.size, chunk_size, threads)
    edges = np.zeros((q, q))
    pairs = np.zeros((q, q))
    memberships = np.zeros((table.n, q))
    for e, p, m in parts:
        edges += e
        pairs += p
        memberships += m
    return edges, pairs, memberships


def block_ratio(edges: np.ndarray, pairs: np.ndarray, flags: list[str]) -> np.ndarray:
    """
    π = edges / pairs per block, with empty blocks set to :data:`EMPTY_BLOCK_PI`.

    Every empty block appends an ``empty-block`` flag.
    """
    empty = pairs <= 0
    if empty.any():
        for q, l in zip(*np.nonzero(empty), strict=True):
            flags.append(f"empty-block:{q + 1},{l + 1}")
        logger.warning("M-step: %d block(s) have no expected pairs; pi set to %s", int(empty.sum()), EMPTY_BLOCK_PI)
    with np.errstate(divide="ignore", invalid="ignore"):
        pi = np.where(empty, EMPTY_BLOCK_PI, edges / np.where(empty, 1.0, pairs))
    return np.clip(pi, 0.0, 1.0)


def floor_alpha(alpha: np.ndarray, flags: list[str]) -> np.ndarray:
    """Raise vanishing proportions to :data:`ALPHA_FLOOR` and renormalize."""
    if np.any(alpha < ALPHA_FLOOR):
        flags.append("alpha-floor")
        logger.warning("M-step: a class lost all its mass; its proportion is floored at %s", ALPHA_FLOOR)
        alpha = np.maximum(alpha, ALPHA_FLOOR)
    return alpha / alpha.sum()


def em_m_step(
    graph: LabeledGraph,
    table: PosteriorTable,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    threads: int = 1,
) -> tuple[SbmParams, np.ndarray, list[str]]:
    """
    Maximize the expected complete-data log-likelihood under ``table``.

    α_q = (1/n) sum_i P(Z_i = q | X), and π[q, l] is the expected number of
    edges over the expected number of ordered pairs in block (q, l).

    :return: ``(params, memberships, flags)``.
    """
    flags: list[str] = []
    edges, pairs, memberships = _expected_counts(graph, table, chunk_size, threads)
    alpha = floor_alpha(memberships.mean(axis=0), flags)
    return SbmParams(alpha, block_ratio(edges, pairs, flags)), memberships, flags


def exact_em_fit(
    graph: LabeledGraph,
    init: SbmParams,
    max_iter: int = 500,
    tol: float = 1e-8,
    cap: int = DEFAULT_ENUMERATION_CAP,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    threads: int = 1,
) -> FitResult:
    """
    Maximum-likelihood (α, π) by EM with an exact E-step.

    Each iteration computes the exact posterior at the current parameters and
    applies :func:`em_m_step`. ``objective_trace`` holds L2 at the
    initialization and after every iteration; EM never decreases it. The loop
    stops once an iteration gains less than ``tol``.

    :raises SizeLimitError: If Q^n exceeds ``cap``.
    :raises DegenerateModelError: If the initialization makes every label vector impossible.
    """
    check_enumerable(graph.n, init.q, cap)
    if graph.n == 0:
        return FitResult(init, [0.0], 0, 1, True, "exact-em", np.zeros((0, init.q)))

    params = init
    table = posterior_table(graph, params, cap, chunk_size, threads)
    trace = [table.log_marginal]
    flags: list[str] = []
    memberships = table.marginals()
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        params, memberships, step_flags = em_m_step(graph, table, chunk_size, threads)
        flags.extend(f for f in step_flags if f not in flags)
        table = posterior_table(graph, params, cap, chunk_size, threads)
        trace.append(table.log_marginal)
        logger.debug("exact EM iteration %d: L2=%.17g", iterations, trace[-1])
        if trace[-1] - trace[-2] < tol:
            converged = True
            break

    return FitResult(
        params=params,
        objective_trace=trace,
        iterations=iterations,
        restarts_used=1,
        converged=converged,
        method="exact-em",
        tau=table.marginals(),
        flags=flags,
        restart_objectives=[trace[-1]],
    )

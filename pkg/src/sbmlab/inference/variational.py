"""
Mean-field variational EM.

The posterior over label vectors is approximated by a product of independent
row-wise multinomials τ (a :class:`TauMatrix`). The variational functional

    J(X; τ, α, π) = sum over i != j, q, l of τ_iq τ_jl b_ij(q, l)
                    - sum over i, q of τ_iq (log τ_iq - log α_q),

with ``b_ij(q, l) = X_ij log π_ql + (1 - X_ij) log(1 - π_ql)``, is a lower bound
on the marginal log-likelihood, and ``L2 - J`` is the KL divergence from D_τ to
the exact posterior. :func:`vem_fit` maximizes J alternately in τ
(:func:`update_tau`) and in (α, π) (:func:`m_step`), from several restarts.

Every evaluation is O(n^2 Q^2) through dense products with the adjacency
matrix; nothing here enumerates label vectors.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, xlogy

from ..core.errors import ParameterError, ShapeError, SizeLimitError
from ..core.graph import LabeledGraph, validate_labels
from ..core.params import SbmParams
from ..core.rng import RngStreams, streams
from .exact import PosteriorTable, block_ratio, floor_alpha
from .results import FitResult

logger = logging.getLogger(__name__)

DEFAULT_RESTARTS = 10
DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-8
DEFAULT_DAMPING = 0.0
DEFAULT_INNER_ITERS = 1
DEFAULT_BACKTRACK_STEPS = 8

#: τ entries are floored here (then rows renormalized) before any logarithm.
DEFAULT_TAU_FLOOR = 1e-12

#: Largest drop of J an accepted τ update may cause.
ASCENT_SLACK = 1e-9

#: Row-sum tolerance of a membership matrix.
ROW_SUM_TOL = 1e-12

#: log π is evaluated at max(π, LOG_CLIP) inside the τ update.
LOG_CLIP = 1e-300

#: Smallest graph a variational fit accepts.
MIN_VERTICES = 2

#: How exact EM started from a variational fit is named in size errors.
EXACT_EM_START = "exact EM (started from a variational fit)"


@dataclass(frozen=True, eq=False)
class TauMatrix:
    """
    An n×Q row-stochastic membership matrix.

    Row i is the variational distribution of vertex i's class. The product
    distribution it defines over label vectors is D_τ(z) = prod_i τ[i, z_i].

    :ivar values: The matrix; entries in [0, 1], rows summing to 1 within
        :data:`ROW_SUM_TOL`.
    :ivar stalled: Set by :func:`update_tau` when no damped step could keep J
        from decreasing and the input was returned unchanged.
    """

    values: np.ndarray
    stalled: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ParameterError(f"tau must be a matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
            raise ParameterError("tau entries must lie in [0, 1]")
        if values.size and np.max(np.abs(values.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ParameterError("every row of tau must sum to 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, n: int, q: int) -> TauMatrix:
        return cls(np.full((n, q), 1.0 / q))

    @classmethod
    def from_rows(cls, rows, floor: float = 0.0) -> TauMatrix:
        """Normalize non-negative rows, optionally flooring entries first."""
        rows = np.maximum(np.asarray(rows, dtype=float), floor)
        return cls(rows / rows.sum(axis=1, keepdims=True))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def q(self) -> int:
        return int(self.values.shape[1])

    def labels(self) -> np.ndarray:
        """Row argmax, lowest class on ties."""
        return np.argmax(self.values, axis=1).astype(np.int64)

    def product_prob(self, z) -> float:
        """D_τ(z)."""
        z = validate_labels(z, self.n, self.q)
        return float(np.prod(self.values[np.arange(self.n), z]))


def hard_assignment(labels, q: int) -> TauMatrix:
    """The one-hot τ = δ_z of a label vector."""
    z = np.asarray(labels, dtype=np.int64)
    validate_labels(z, z.size, q)
    return TauMatrix(np.eye(q)[z] if z.size else np.zeros((0, q)))


def _as_streams(seed: int | RngStreams) -> RngStreams:
    return seed if isinstance(seed, RngStreams) else streams(seed)


def _check_shapes(graph: LabeledGraph, tau: TauMatrix, params: SbmParams | None = None):
    if tau.n != graph.n:
        raise ShapeError(f"tau has {tau.n} rows for a graph on {graph.n} vertices")
    if params is not None and tau.q != params.q:
        raise ShapeError(f"tau has {tau.q} columns but the parameters have Q={params.q}")


def _pair_weights(graph: LabeledGraph, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Soft block counts: ``(τᵀ X τ, τᵀ X̄ τ)`` where X̄ marks the non-edges i != j.

    Together they are the expected edge and non-edge counts per block under D_τ.
    Both come from their own product, so a complete (or empty) graph gives
    non-edge (or edge) weights that are exactly zero.
    """
    x = graph.adjacency.astype(float)
    x_bar = 1.0 - x
    np.fill_diagonal(x_bar, 0.0)
    return tau.T @ x @ tau, tau.T @ x_bar @ tau


def elbo(graph: LabeledGraph, tau: TauMatrix, params: SbmParams) -> float:
    """
    The variational functional J(X; τ, α, π), with ``0 log 0 = 0``.

    With a one-hot τ = δ_z this equals ``complete_loglik + prior_loglik`` at z.
    May be ``-inf`` when τ puts weight on a pair that π declares impossible.

    :raises ShapeError: If τ does not match the graph or the parameters.
    """
    _check_shapes(graph, tau, params)
    t = tau.values
    edges, non_edges = _pair_weights(graph, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = xlogy(edges, params.pi) + xlogy(non_edges, 1.0 - params.pi)
    entropy = -xlogy(t, t).sum()
    return float(fit.sum() + entropy + (t @ np.log(params.alpha)).sum())


def _fixed_point(graph: LabeledGraph, tau: np.ndarray, params: SbmParams, floor: float) -> np.ndarray:
    """
    The right-hand side of the τ stationarity condition, evaluated in parallel for all rows.

    ``τ_iq ∝ α_q exp(sum over j != i, l of τ_jl [b_ij(q, l) + b_ji(l, q)])``.
    """
    x = graph.adjacency.astype(float)
    x_bar = 1.0 - x
    np.fill_diagonal(x_bar, 0.0)
    log_pi = np.log(np.clip(params.pi, LOG_CLIP, None))
    log_1mpi = np.log(np.clip(1.0 - params.pi, LOG_CLIP, None))
    outgoing = (x @ tau) @ log_pi.T + (x_bar @ tau) @ log_1mpi.T
    incoming = (x.T @ tau) @ log_pi + (x_bar.T @ tau) @ log_1mpi
    logits = np.log(params.alpha)[None, :] + outgoing + incoming
    rows = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    rows = np.maximum(rows, floor)
    return rows / rows.sum(axis=1, keepdims=True)


def update_tau(
    graph: LabeledGraph,
    tau: TauMatrix,
    params: SbmParams,
    inner_iters: int = DEFAULT_INNER_ITERS,
    damping: float = DEFAULT_DAMPING,
    tau_floor: float = DEFAULT_TAU_FLOOR,
    backtrack_steps: int = DEFAULT_BACKTRACK_STEPS,
) -> TauMatrix:
    """
    Fixed-point updates of τ at fixed (α, π).

    Each of the ``inner_iters`` sweeps moves every row to
    ``(1 - λ) * fixed point + λ * old row`` with λ = ``damping``. When that
    would decrease J by more than :data:`ASCENT_SLACK`, λ is pushed towards 1
    (``λ -> (1 + λ) / 2``) up to ``backtrack_steps`` times; if J still drops,
    the sweep's input is returned with ``stalled`` set.

    :raises ParameterError: If ``damping`` is outside [0, 1) or ``inner_iters`` < 1.
    """
    if not 0.0 <= damping < 1.0:
        raise ParameterError(f"damping must lie in [0, 1), got {damping}")
    if inner_iters < 1:
        raise ParameterError(f"inner_iters must be at least 1, got {inner_iters}")
    _check_shapes(graph, tau, params)
    if tau.n == 0:
        return tau

    current = tau
    j_current = elbo(graph, current, params)
    for _ in range(inner_iters):
        target = _fixed_point(graph, current.values, params, tau_floor)
        lam = damping
        for _ in range(backtrack_steps + 1):
            candidate = TauMatrix.from_rows((1.0 - lam) * target + lam * current.values)
            j_candidate = elbo(graph, candidate, params)
            if j_candidate >= j_current - ASCENT_SLACK:
                break
            lam = (1.0 + lam) / 2.0
        else:
            logger.warning("update_tau: no damped step keeps J from decreasing; tau left unchanged")
            return TauMatrix(current.values, stalled=True)
        current, j_current = candidate, j_candidate
    return current


def _m_step(graph: LabeledGraph, tau: TauMatrix) -> tuple[SbmParams, list[str]]:
    flags: list[str] = []
    t = tau.values
    edges, non_edges = _pair_weights(graph, t)
    pi = block_ratio(edges, edges + non_edges, flags)
    alpha = floor_alpha(t.mean(axis=0), flags)
    return SbmParams(alpha, pi), flags


def m_step(graph: LabeledGraph, tau: TauMatrix) -> SbmParams:
    """
    The maximizer of J over (α, π) at fixed τ.

    ``α_q = (1/n) sum_i τ_iq`` and
    ``π_ql = sum over i != j of τ_iq τ_jl X_ij / sum over i != j of τ_iq τ_jl``.
    A block with zero denominator gets π = 0.5 and a logged warning.

    :raises SizeLimitError: If the graph has no vertices.
    """
    if graph.n == 0:
        raise SizeLimitError("the M-step needs at least one vertex")
    _check_shapes(graph, tau)
    return _m_step(graph, tau)[0]


def check_fittable(n: int, method: str = "variational EM") -> None:
    """
    Refuse graphs too small for a variational fit.

    ``method`` names the estimator in the message; exact EM started from a
    variational fit passes its own name.

    :raises SizeLimitError: If ``n`` is below :data:`MIN_VERTICES`.
    """
    if n < MIN_VERTICES:
        raise SizeLimitError(f"{method} needs at least {MIN_VERTICES} vertices, got n={n}")


def degree_init(graph: LabeledGraph, q: int, tau_floor: float = DEFAULT_TAU_FLOOR) -> TauMatrix:
    """
    Deterministic initialization from total degree.

    Vertices are ranked by in-degree plus out-degree (ties by vertex index) and
    cut into ``q`` equal-size quantile bins; each vertex gets its bin one-hot,
    floored.
    """
    n = graph.n
    degree = graph.adjacency.sum(axis=0) + graph.adjacency.sum(axis=1)
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(degree, kind="stable")] = np.arange(n)
    bins = ranks * q // max(n, 1)
    return TauMatrix.from_rows(np.eye(q)[bins], tau_floor)


def random_init(n: int, q: int, rng: np.random.Generator, tau_floor: float = DEFAULT_TAU_FLOOR) -> TauMatrix:
    """Rows drawn from a symmetric Dirichlet(1), floored."""
    return TauMatrix.from_rows(rng.dirichlet(np.ones(q), size=n), tau_floor)


def initial_tau(
    graph: LabeledGraph, q: int, k: int, rng: RngStreams, tau_floor: float = DEFAULT_TAU_FLOOR
) -> TauMatrix:
    """The τ restart ``k`` starts from: degree bins for 0, Dirichlet rows after that."""
    if k == 0:
        return degree_init(graph, q, tau_floor)
    return random_init(graph.n, q, rng.restart(k), tau_floor)


@dataclass
class _RestartRun:
    params: SbmParams
    tau: TauMatrix
    trace: list[float]
    iterations: int
    converged: bool
    flags: list[str] = field(default_factory=list)


def _run_restart(
    graph: LabeledGraph,
    tau: TauMatrix,
    max_iter: int,
    tol: float,
    damping: float,
    inner_iters: int,
    tau_floor: float,
    backtrack_steps: int,
) -> _RestartRun:
    params, flags = _m_step(graph, tau)
    trace = [elbo(graph, tau, params)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        tau = update_tau(graph, tau, params, inner_iters, damping, tau_floor, backtrack_steps)
        if tau.stalled and "tau-stall" not in flags:
            flags.append("tau-stall")
        params, step_flags = _m_step(graph, tau)
        flags.extend(f for f in step_flags if f not in flags)
        trace.append(elbo(graph, tau, params))
        logger.debug("VEM iteration %d: J=%.17g", iterations, trace[-1])
        if trace[-1] - trace[-2] < tol:
            converged = True
            break
    return _RestartRun(params, tau, trace, iterations, converged, flags)


def vem_fit(
    graph: LabeledGraph,
    q: int,
    restarts: int = DEFAULT_RESTARTS,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    seed: int | RngStreams = 0,
    *,
    damping: float = DEFAULT_DAMPING,
    inner_iters: int = DEFAULT_INNER_ITERS,
    tau_floor: float = DEFAULT_TAU_FLOOR,
    backtrack_steps: int = DEFAULT_BACKTRACK_STEPS,
    init: TauMatrix | None = None,
    threads: int = 1,
) -> FitResult:
    """
    Variational estimators (α̃, π̃) by multi-restart variational EM.

    Restart ``k`` starts from :func:`initial_tau` (or from ``init`` for
    restart 0 when given), then alternates :func:`update_tau` and
    :func:`m_step` until J gains less than ``tol`` or ``max_iter`` iterations
    have run. The restart with the largest final J wins; ties go to the lowest
    restart index. Restarts draw from independent streams of ``seed``, so the
    result does not depend on ``threads``.

    :raises SizeLimitError: If the graph has fewer than 2 vertices.
    :raises ParameterError: If ``q`` or ``restarts`` is below 1.
    """
    check_fittable(graph.n)
    if q < 1:
        raise ParameterError(f"q must be at least 1, got {q}")
    if restarts < 1:
        raise ParameterError(f"restarts must be at least 1, got {restarts}")
    if init is not None and (init.n, init.q) != (graph.n, q):
        raise ShapeError(f"init tau has shape {(init.n, init.q)}, expected {(graph.n, q)}")

    rng = _as_streams(seed)

    def run(k: int) -> _RestartRun:
        start = init if k == 0 and init is not None else initial_tau(graph, q, k, rng, tau_floor)
        return _run_restart(graph, start, max_iter, tol, damping, inner_iters, tau_floor, backtrack_steps)

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(run, range(restarts)))
    else:
        runs = [run(k) for k in range(restarts)]

    best = 0
    for k, candidate in enumerate(runs):
        if candidate.trace[-1] > runs[best].trace[-1]:
            best = k
    chosen = runs[best]
    logger.info("vem_fit: restart %d of %d wins with J=%.17g", best, restarts, chosen.trace[-1])
    return FitResult(
        params=chosen.params,
        objective_trace=chosen.trace,
        iterations=chosen.iterations,
        restarts_used=restarts,
        converged=chosen.converged,
        method="vem",
        tau=np.array(chosen.tau.values),
        flags=chosen.flags,
        restart_objectives=[run.trace[-1] for run in runs],
    )


def fit_tau(
    graph: LabeledGraph,
    params: SbmParams,
    restarts: int = DEFAULT_RESTARTS,
    seed: int | RngStreams = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    *,
    damping: float = DEFAULT_DAMPING,
    tau_floor: float = DEFAULT_TAU_FLOOR,
    backtrack_steps: int = DEFAULT_BACKTRACK_STEPS,
) -> TauMatrix:
    """
    Maximize J over τ alone at fixed (α, π), keeping the best of several restarts.

    Since ``L2 - J = K(D_τ, P^X)`` and L2 does not depend on τ, the returned τ
    is also the restart with the smallest KL divergence to the exact posterior.
    """
    if restarts < 1:
        raise ParameterError(f"restarts must be at least 1, got {restarts}")
    if graph.n == 0:
        return TauMatrix(np.zeros((0, params.q)))
    rng = _as_streams(seed)
    best, best_j = None, -np.inf
    for k in range(restarts):
        tau = initial_tau(graph, params.q, k, rng, tau_floor)
        j = elbo(graph, tau, params)
        for _ in range(max_iter):
            tau = update_tau(graph, tau, params, 1, damping, tau_floor, backtrack_steps)
            j_next = elbo(graph, tau, params)
            gain, j = j_next - j, j_next
            if tau.stalled or gain < tol:
                break
        if best is None or j > best_j:
            best, best_j = tau, j
    return best


def tv_pinsker_check(tau: TauMatrix, table: PosteriorTable, z_star) -> tuple[float, float, bool]:
    """
    Check ``|D_τ(z*) - P(z* | X)| <= sqrt(-(1/2) log P(z* | X))``.

    :return: ``(lhs, rhs, ok)``; ``rhs`` is ``+inf`` when P(z* | X) = 0.
    """
    if (tau.n, tau.q) != (table.n, table.q):
        raise ShapeError(f"tau has shape {(tau.n, tau.q)}, the posterior is over {table.q}^{table.n}")
    z_star = validate_labels(z_star, table.n, table.q)
    p = table[z_star]
    lhs = abs(tau.product_prob(z_star) - p)
    rhs = float(np.sqrt(max(0.0, -0.5 * np.log(p)))) if p > 0 else float("inf")
    return lhs, rhs, lhs <= rhs + 1e-12

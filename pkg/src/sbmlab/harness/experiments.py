"""
Finite-n experiments: posterior concentration at small n, and moment recovery from sampled graphs.

Both are deterministic given their root seed; per-seed work draws from
``streams(seed).cell(...)`` so results do not depend on the thread count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core.assumptions import a1_violations
from ..core.errors import (
    DegenerateModelError,
    DegenerateMomentsError,
    ParameterError,
    RootExtractionError,
    SizeLimitError,
)
from ..core.params import SbmParams
from ..core.rng import streams
from ..core.sampling import sample_from_streams
from ..core.symmetry import DEFAULT_SYMMETRY_TOL, MAX_PERMUTATION_Q, param_distance
from ..inference.exact import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_ENUMERATION_CAP,
    check_enumerable,
    class_mass,
    kl_divergence,
    posterior_ratio_stat,
    posterior_table,
)
from ..inference.variational import DEFAULT_RESTARTS, fit_tau
from ..moments.estimate import min_vertices, moments_analytic, moments_empirical
from ..moments.recover import recover_from_moments

logger = logging.getLogger(__name__)

#: Quantiles reported by the experiment summaries.
QUANTILES = (0.1, 0.5, 0.9)

#: Posterior mass of the true class counted as concentrated.
MASS_THRESHOLD = 0.95


def _quantiles(values) -> dict[str, float | None]:
    finite = np.asarray([v for v in values if v is not None], dtype=float)
    if not finite.size:
        return {f"q{int(q * 100)}": None for q in QUANTILES}
    return {f"q{int(q * 100)}": float(np.quantile(finite, q)) for q in QUANTILES}


def _map(fn, items, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# --- Posterior concentration -------------------------------------------------


@dataclass
class ConcentrationRecord:
    """One seed of the concentration experiment."""

    seed: int
    ratio_stat: float
    class_mass: float
    kl_min: float
    flags: list[str] = field(default_factory=list)


@dataclass
class ConcentrationSummary:
    """
    Quantiles over seeds of the ratio statistic, the mass of [z*], and the best variational KL.

    :ivar concentrated_share: Fraction of seeds whose [z*] mass exceeds
        :data:`MASS_THRESHOLD`.
    :ivar a1_ok: Whether the truth satisfies A1; without it no concentration is
        expected.
    """

    n: int
    seeds: int
    ratio_stat: dict[str, float | None]
    class_mass: dict[str, float | None]
    kl_min: dict[str, float | None]
    concentrated_share: float
    a1_ok: bool
    records: list[ConcentrationRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def run_concentration_experiment(
    truth: SbmParams,
    n: int,
    seeds: int,
    *,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    cap: int = DEFAULT_ENUMERATION_CAP,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    symmetry_tol: float = DEFAULT_SYMMETRY_TOL,
    threads: int = 1,
) -> ConcentrationSummary:
    """
    Measure how the exact posterior at the truth concentrates on [z*].

    Per seed: sample a graph, enumerate its posterior at the true parameters,
    and record the posterior ratio statistic, the mass of the true label
    class, and ``K(D_τ, P^X)`` for the best τ of ``restarts`` fixed-parameter
    variational runs.

    :raises SizeLimitError: If Q^n exceeds ``cap``.
    """
    check_enumerable(n, truth.q, cap)
    if seeds < 1:
        raise ParameterError(f"the experiment needs at least one seed, got {seeds}")
    root = streams(seed)

    def one(s: int) -> ConcentrationRecord:
        rng = root.cell(n, s)
        graph = sample_from_streams(truth, n, rng)
        hidden = graph.without_labels()
        table = posterior_table(hidden, truth, cap, chunk_size)
        tau = fit_tau(hidden, truth, restarts, rng.cell(0))
        flags: list[str] = []
        record = ConcentrationRecord(
            seed=s,
            ratio_stat=posterior_ratio_stat(table, graph.labels, truth.pi, symmetry_tol, flags=flags),
            class_mass=class_mass(table, graph.labels, truth.pi, symmetry_tol),
            kl_min=kl_divergence(tau, table, flags=flags),
            flags=flags,
        )
        logger.info("concentration n=%d seed=%d ratio=%.6g mass=%.6g", n, s, record.ratio_stat, record.class_mass)
        return record

    records = _map(one, list(range(seeds)), threads)
    masses = [r.class_mass for r in records]
    return ConcentrationSummary(
        n=n,
        seeds=seeds,
        ratio_stat=_quantiles(r.ratio_stat for r in records),
        class_mass=_quantiles(masses),
        kl_min=_quantiles(r.kl_min for r in records),
        concentrated_share=float(np.mean([m > MASS_THRESHOLD for m in masses])),
        a1_ok=not a1_violations(truth.pi),
        records=records,
    )


# --- Moment recovery ---------------------------------------------------------


@dataclass
class MomentRecord:
    """One (G, seed) cell; ``flag`` names the error kind when recovery failed."""

    graphs: int
    seed: int
    err_pi: float | None = None
    err_alpha: float | None = None
    flag: str | None = None


@dataclass
class MomentSummary:
    """Median recovery error and failure share per graph count."""

    n: int
    source: str
    by_graphs: list[dict]
    records: list[MomentRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def run_moment_experiment(
    truth: SbmParams,
    g_grid: list[int],
    n: int,
    seeds: int,
    *,
    seed: int = 0,
    analytic: bool = False,
    orientation: str = "row",
    average_orderings: int = 0,
    recover_options: dict | None = None,
    threads: int = 1,
) -> MomentSummary:
    """
    Recover the truth from moments of ``G`` sampled graphs, for each G in the grid.

    With ``analytic`` the exact moments replace the Monte-Carlo ones, which
    isolates the recovery algebra from sampling error. Degenerate or
    unrecoverable moments are recorded as a flag, never raised.

    :raises SizeLimitError: If ``n < 2Q``.
    """
    if n < min_vertices(truth.q):
        raise SizeLimitError(f"moments for Q={truth.q} need n >= 2Q = {min_vertices(truth.q)}, got n={n}")
    options = recover_options or {}
    root = streams(seed)

    def one(cell: tuple[int, int]) -> MomentRecord:
        graphs, s = cell
        record = MomentRecord(graphs, s)
        if analytic:
            moments = moments_analytic(truth, orientation)
        else:
            moments = moments_empirical(
                truth, graphs, n, root.cell(graphs, s), orientation=orientation, average_orderings=average_orderings
            )
        try:
            result = recover_from_moments(moments, **options)
        except (DegenerateMomentsError, DegenerateModelError, RootExtractionError) as e:
            record.flag = e.kind
            return record
        record.err_pi, record.err_alpha, _ = param_distance(result.params, truth, MAX_PERMUTATION_Q)
        return record

    records = _map(one, [(g, s) for g in g_grid for s in range(seeds)], threads)
    by_graphs = []
    for graphs in g_grid:
        cells = [r for r in records if r.graphs == graphs]
        errors = [r.err_pi for r in cells if r.err_pi is not None]
        by_graphs.append(
            {
                "graphs": graphs,
                "median_err_pi": float(np.median(errors)) if errors else None,
                "median_err_alpha": _quantiles(r.err_alpha for r in cells)["q50"],
                "failed_share": float(np.mean([r.flag is not None for r in cells])) if cells else 0.0,
            }
        )
        logger.info("moment experiment G=%d: %s", graphs, by_graphs[-1])
    return MomentSummary(n, "analytic" if analytic else "empirical", by_graphs, records)

"""
Consistency sweeps: sample, fit, and score over a grid of graph sizes and seeds.

Every cell ``(n, seed, method)`` samples its graph from the stream
``streams(cfg.seed).cell(n, seed)``, so all methods at the same ``(n, seed)``
see the same graph and the whole sweep is a deterministic function of the
config. Cells run on a thread pool but rows are emitted in grid order
(``n``, then seed, then method in config order), and the CSV is written row by
row as cells complete in that order.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .. import serialize
from ..core.errors import FormatError, ParameterError, SbmError
from ..core.graph import LabeledGraph
from ..core.params import SbmParams
from ..core.rng import RngStreams, streams
from ..core.sampling import sample_from_streams
from ..core.symmetry import DEFAULT_SYMMETRY_TOL, MAX_PERMUTATION_Q, label_error, param_distance
from ..inference.exact import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_ENUMERATION_CAP,
    enumeration_size,
    exact_em_fit,
    marginal_loglik,
    posterior_ratio_stat,
    posterior_table,
)
from ..inference.results import FitResult
from ..inference.variational import EXACT_EM_START, TauMatrix, check_fittable, elbo, vem_fit
from ..moments.estimate import min_vertices, moments_empirical
from ..moments.recover import recover_from_moments

logger = logging.getLogger(__name__)

METHODS = ("vem", "exact-em", "moments")

CSV_COLUMNS = serialize.SWEEP_COLUMNS


class ParamsModel(BaseModel):
    """(α, π) as written in a params file."""

    model_config = ConfigDict(extra="forbid")

    q: int | None = Field(default=None, ge=1, description="Declared class count, checked against alpha.")
    alpha: list[float]
    pi: list[list[float]]

    def to_params(self) -> SbmParams:
        return SbmParams.from_lists(self.alpha, self.pi, self.q)

    @classmethod
    def from_params(cls, params: SbmParams) -> ParamsModel:
        return cls(q=params.q, alpha=params.alpha.tolist(), pi=params.pi.tolist())


class SweepConfig(BaseModel):
    """The grid and solver knobs of one consistency sweep, read from a JSON file."""

    model_config = ConfigDict(extra="forbid")

    truth: ParamsModel
    n_grid: list[int] = Field(min_length=1, description="Vertex counts, strictly ascending.")
    seeds: int = Field(default=20, ge=1, description="Graphs sampled per vertex count.")
    methods: list[Literal["vem", "exact-em", "moments"]] = Field(default_factory=lambda: ["vem"])
    restarts: int = Field(default=10, ge=1)
    tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=500, ge=1)
    output_path: str | None = None
    record_timing: bool = Field(default=False, description="Write measured wall_ms instead of 0.")
    moment_graphs: int = Field(default=100_000, ge=1, description="Graphs behind each moments-method cell.")
    moment_n: int | None = Field(default=None, description="Vertices per moment graph; defaults to 2Q.")
    seed: int = Field(default=0, ge=0, description="Root seed of the sweep.")

    @field_validator("n_grid")
    @classmethod
    def _check_grid(cls, grid: list[int]) -> list[int]:
        if any(n < 0 for n in grid):
            raise ValueError("vertex counts must be non-negative")
        if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
            raise ValueError(f"n_grid must be strictly ascending, got {grid}")
        return grid

    @model_validator(mode="after")
    def _check_truth(self) -> SweepConfig:
        try:
            params = self.truth.to_params()
        except ParameterError as e:
            raise ValueError(f"truth: {e}") from e
        if self.moment_n is not None and self.moment_n < min_vertices(params.q):
            raise ValueError(f"moment_n must be at least 2Q = {min_vertices(params.q)}")
        return self

    @property
    def params(self) -> SbmParams:
        return self.truth.to_params()

    @classmethod
    def load(cls, path: str | Path) -> SweepConfig:
        """
        Read a sweep config from JSON.

        :raises FormatError: If the file is unreadable, not JSON, or invalid.
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise FormatError(path, f"cannot read sweep config: {e}") from e
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            detail = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
            )
            raise FormatError(path, f"invalid sweep config: {detail}") from e


@dataclass
class SweepRow:
    """
    One scored cell. Metrics a cell could not produce are ``None`` (empty in the CSV).

    :ivar kl_gap: ``L2 - J`` at the fitted parameters, enumerable cells only.
    :ivar ratio_stat: The posterior ratio statistic at the truth, enumerable cells only.
    :ivar fitted: The fitted parameters; stored in the sidecar, not in the CSV.
    """

    n: int
    seed: int
    method: str
    err_pi: float | None = None
    err_alpha: float | None = None
    label_err: float | None = None
    objective: float | None = None
    kl_gap: float | None = None
    ratio_stat: float | None = None
    wall_ms: float = 0.0
    flags: list[str] = field(default_factory=list)
    fitted: SbmParams | None = None

    @property
    def failed(self) -> bool:
        return self.err_pi is None

    def csv_fields(self) -> list[str]:
        values = [getattr(self, column) for column in CSV_COLUMNS[:-1]]
        return [serialize.format_cell(v) for v in values] + [";".join(self.flags)]

    def to_dict(self) -> dict:
        payload = {column: getattr(self, column) for column in CSV_COLUMNS}
        payload["fitted"] = None if self.fitted is None else serialize.params_to_dict(self.fitted)
        return payload


# --- Cells -----------------------------------------------------------------


@dataclass(frozen=True)
class _Knobs:
    cap: int
    chunk_size: int
    symmetry_tol: float
    max_q: int


def cell_graph(cfg: SweepConfig, n: int, seed: int) -> LabeledGraph:
    """The graph of cell ``(n, seed)``, shared by every method."""
    return sample_from_streams(cfg.params, n, cell_streams(cfg, n, seed))


def cell_streams(cfg: SweepConfig, n: int, seed: int) -> RngStreams:
    return streams(cfg.seed).cell(n, seed)


def _aligned_label_error(fit: FitResult, graph: LabeledGraph, truth: SbmParams, knobs: _Knobs, perm) -> float | None:
    if fit.tau is None or graph.labels is None:
        return None
    # perm maps truth classes to fitted classes; bring fitted labels back.
    labels = perm.inverse().apply(fit.labels())
    return label_error(labels, graph.labels, truth.pi, knobs.symmetry_tol, knobs.max_q)


def _enumerable(graph: LabeledGraph, q: int, knobs: _Knobs) -> bool:
    return enumeration_size(graph.n, q) <= knobs.cap


def _fit_cell(cfg: SweepConfig, graph: LabeledGraph, method: str, rng: RngStreams, knobs: _Knobs) -> FitResult:
    truth = cfg.params
    hidden = graph.without_labels()
    if method == "exact-em":
        check_fittable(hidden.n, EXACT_EM_START)
    start = vem_fit(hidden, truth.q, cfg.restarts, cfg.max_iter, cfg.tol, rng.cell(0))
    if method == "vem":
        return start
    return exact_em_fit(hidden, start.params, cfg.max_iter, cfg.tol, knobs.cap, knobs.chunk_size)


def _score_fit(cfg: SweepConfig, n: int, seed: int, method: str, knobs: _Knobs) -> SweepRow:
    truth = cfg.params
    rng = cell_streams(cfg, n, seed)
    graph = cell_graph(cfg, n, seed)
    row = SweepRow(n, seed, method)

    began = time.perf_counter()
    fit = _fit_cell(cfg, graph, method, rng, knobs)
    elapsed = (time.perf_counter() - began) * 1000.0

    err_pi, err_alpha, perm = param_distance(fit.params, truth, knobs.max_q)
    row.err_pi, row.err_alpha = err_pi, err_alpha
    row.label_err = _aligned_label_error(fit, graph, truth, knobs, perm)
    row.objective = fit.objective
    row.fitted = fit.params
    row.flags = list(fit.flags) + ([] if fit.converged else ["not-converged"])
    row.wall_ms = elapsed if cfg.record_timing else 0.0

    if _enumerable(graph, truth.q, knobs):
        hidden = graph.without_labels()
        tau = TauMatrix.from_rows(fit.tau) if fit.tau is not None else None
        if tau is not None:
            l2 = marginal_loglik(hidden, fit.params, knobs.cap, knobs.chunk_size)
            row.kl_gap = l2 - elbo(hidden, tau, fit.params)
        table = posterior_table(hidden, truth, knobs.cap, knobs.chunk_size)
        row.ratio_stat = posterior_ratio_stat(table, graph.labels, truth.pi, knobs.symmetry_tol, flags=row.flags)
    return row


def _score_moments(cfg: SweepConfig, n: int, seed: int, knobs: _Knobs) -> SweepRow:
    truth = cfg.params
    row = SweepRow(n, seed, "moments")
    moment_n = cfg.moment_n or min_vertices(truth.q)
    began = time.perf_counter()
    moments = moments_empirical(truth, cfg.moment_graphs, moment_n, cell_streams(cfg, n, seed).cell(1))
    result = recover_from_moments(moments)
    elapsed = (time.perf_counter() - began) * 1000.0
    row.err_pi, row.err_alpha, _ = param_distance(result.params, truth, knobs.max_q)
    row.fitted = result.params
    row.flags = list(result.condition_flags)
    row.wall_ms = elapsed if cfg.record_timing else 0.0
    return row


def run_cell(cfg: SweepConfig, n: int, seed: int, method: str, knobs: _Knobs) -> SweepRow:
    """Score one cell; a library error becomes a flagged row instead of stopping the sweep."""
    try:
        if method == "moments":
            row = _score_moments(cfg, n, seed, knobs)
        else:
            row = _score_fit(cfg, n, seed, method, knobs)
    except SbmError as e:
        logger.warning("sweep cell n=%d seed=%d method=%s failed: %s: %s", n, seed, method, e.kind, e)
        return SweepRow(n, seed, method, flags=[f"error:{e.kind}"])
    logger.info("sweep cell n=%d seed=%d method=%s err_pi=%s", n, seed, method, row.err_pi)
    return row


def iter_cells(cfg: SweepConfig, cap: int) -> Iterator[tuple[int, int, str]]:
    """The cells of a sweep in output order; exact EM is skipped where Q^n exceeds ``cap``."""
    q = cfg.params.q
    for n in cfg.n_grid:
        for seed in range(cfg.seeds):
            for method in cfg.methods:
                if method == "exact-em" and enumeration_size(n, q) > cap:
                    logger.info("sweep: skipping exact-em at n=%d (Q^n over the enumeration cap)", n)
                    continue
                yield n, seed, method


def run_consistency_sweep(
    cfg: SweepConfig,
    *,
    output_path: str | Path | None = None,
    threads: int = 1,
    cap: int = DEFAULT_ENUMERATION_CAP,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    symmetry_tol: float = DEFAULT_SYMMETRY_TOL,
    max_q: int = MAX_PERMUTATION_Q,
) -> list[SweepRow]:
    """
    Run every cell of the sweep and score it against the truth.

    Each cell samples its graph, fits it with its method, and records
    :func:`~sbmlab.core.symmetry.param_distance` errors, the label error of
    the membership argmax, the final objective, and, when Q^n is within
    ``cap``, the KL gap ``L2 - J`` and the posterior ratio statistic at the
    truth. When an output path is given (argument, else ``cfg.output_path``)
    rows are appended to the CSV as they complete, and a JSON-lines sidecar
    ``<output>.fits.jsonl`` stores truth and fitted parameters per row.

    An empty ``methods`` list produces no rows (and a header-only CSV).
    """
    knobs = _Knobs(cap, chunk_size, symmetry_tol, max_q)
    cells = list(iter_cells(cfg, cap))
    target = output_path if output_path is not None else cfg.output_path
    writer = serialize.SweepWriter(target, cfg.params) if target else None

    def run(cell):
        return run_cell(cfg, *cell, knobs)

    rows: list[SweepRow] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        results = pool.map(run, cells) if pool else map(run, cells)
        for row in results:
            rows.append(row)
            if writer:
                writer.write(row)
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
        if writer:
            writer.close()
    return rows


# --- Summaries -------------------------------------------------------------


def _median(values) -> float | None:
    finite = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.median(finite)) if finite else None


@dataclass
class SweepSummary:
    """Per (method, n) medians of a sweep, plus the fitted error rate per method."""

    groups: list[dict]
    rates: dict[str, float | None]

    def to_dict(self) -> dict:
        return {"groups": self.groups, "error_rate": self.rates}

    def table(self) -> str:
        """An aligned plain-text table, one line per (method, n)."""
        columns = ("method", "n", "cells", "failed", "err_pi", "err_alpha", "label_err", "kl_gap", "ratio_stat")
        body = [[serialize.format_summary(group[c]) for c in columns] for group in self.groups]
        widths = [max(len(c), *(len(line[i]) for line in body)) if body else len(c) for i, c in enumerate(columns)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths, strict=True))]
        lines += ["  ".join(v.ljust(w) for v, w in zip(line, widths, strict=True)) for line in body]
        for method, rate in self.rates.items():
            lines.append(f"{method}: err_pi ~ n^{serialize.format_summary(rate)}")
        return "\n".join(line.rstrip() for line in lines)


def summarize_sweep(rows: list[SweepRow]) -> SweepSummary:
    """Group rows by (method, n) in first-seen order and take medians of every metric."""
    grouped: dict[tuple[str, int], list[SweepRow]] = {}
    for row in rows:
        grouped.setdefault((row.method, row.n), []).append(row)
    groups = []
    for (method, n), members in grouped.items():
        groups.append(
            {
                "method": method,
                "n": n,
                "cells": len(members),
                "failed": sum(row.failed for row in members),
                "flagged": sum(bool(row.flags) for row in members),
                **{
                    metric: _median(getattr(row, metric) for row in members)
                    for metric in ("err_pi", "err_alpha", "label_err", "objective", "kl_gap", "ratio_stat")
                },
            }
        )
    methods = dict.fromkeys(row.method for row in rows)
    return SweepSummary(groups, {method: estimate_error_rate(rows, method) for method in methods})


def estimate_error_rate(rows: list[SweepRow], method: str) -> float | None:
    """
    Least-squares slope of log(median err_pi) against log(n) for one method.

    A slope near -1 means err_pi shrinks like 1/n. Returns ``None`` with fewer
    than two sizes having a positive median. The rate is reported, never
    asserted.
    """
    by_n: dict[int, list[float | None]] = {}
    for row in rows:
        if row.method == method and row.n > 0:
            by_n.setdefault(row.n, []).append(row.err_pi)
    points = [(n, _median(errs)) for n, errs in sorted(by_n.items())]
    points = [(n, m) for n, m in points if m is not None and m > 0]
    if len(points) < 2:
        return None
    x = np.log([n for n, _ in points])
    y = np.log([m for _, m in points])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)

"""
Finite-n trend experiments: consistency of the variational estimates, posterior
concentration, the quality of the mean-field approximation, the cost of one
variational iteration, and the sampling error of moment recovery.
"""

import time

import numpy as np
import pytest

from sbmlab.core import SbmParams, sample_graph
from sbmlab.harness import run_concentration_experiment, run_consistency_sweep, run_moment_experiment, summarize_sweep
from sbmlab.inference.variational import m_step, random_init, update_tau, vem_fit

from .conftest import ASSORTATIVE, SEPARATED

pytestmark = pytest.mark.integration


def medians_by_n(rows, metric):
    return {group["n"]: group[metric] for group in summarize_sweep(rows).groups}


def test_consistency_sweep_error_shrinks(consistency_sweep):
    rows, _ = consistency_sweep
    assert not any(row.failed for row in rows)
    err_pi = medians_by_n(rows, "err_pi")
    sizes = sorted(err_pi)
    assert sizes == [30, 60, 120, 240]
    for small, large in zip(sizes, sizes[1:], strict=False):
        assert err_pi[large] <= err_pi[small]
    assert err_pi[240] <= 0.05
    assert medians_by_n(rows, "err_alpha")[240] <= 0.05


def test_consistency_sweep_is_byte_stable(consistency_sweep, consistency_config, tmp_path):
    _, first = consistency_sweep
    again = tmp_path / "again.csv"
    run_consistency_sweep(consistency_config, output_path=again, threads=4)
    assert again.read_bytes() == first.read_bytes()


@pytest.mark.parametrize("seed", range(5))
def test_vem_traces_never_decrease(seed):
    graph = sample_graph(SEPARATED, 60, seed).without_labels()
    fit = vem_fit(graph, 2, restarts=3, max_iter=200, tol=1e-8, seed=seed)
    assert np.all(np.diff(fit.objective_trace) >= -1e-9)


def test_posterior_concentrates_at_n12():
    summary = run_concentration_experiment(ASSORTATIVE, 12, 100, restarts=5, threads=4)
    assert summary.a1_ok
    assert summary.ratio_stat["q90"] < 0.05
    assert summary.concentrated_share >= 0.9


def test_variational_kl_shrinks_with_n():
    medians = [
        run_concentration_experiment(ASSORTATIVE, n, 50, restarts=5, threads=4).kl_min["q50"] for n in (6, 8, 10, 12)
    ]
    for small, large in zip(medians, medians[1:], strict=False):
        assert large < small


def _iteration_seconds(n, q, repeats=7):
    rng = np.random.default_rng(n)
    params = SbmParams(np.full(q, 1 / q), rng.uniform(0.1, 0.9, size=(q, q)))
    graph = sample_graph(params, n, 0).without_labels()
    tau = random_init(n, q, rng)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        tau = update_tau(graph, tau, params, inner_iters=1)
        params = m_step(graph, tau)
        best = min(best, time.perf_counter() - start)
    return best


def test_iteration_cost_is_quadratic():
    ratio = _iteration_seconds(2000, 3) / _iteration_seconds(1000, 3)
    assert 3.0 <= ratio <= 6.0


def test_moment_recovery_error_shrinks_with_more_graphs():
    truth = SbmParams(np.array([0.5, 0.5]), np.array([[0.8, 0.6], [0.2, 0.3]]))
    summary = run_moment_experiment(truth, [10_000, 100_000, 1_000_000], 4, 20, threads=4)
    medians = [group["median_err_pi"] for group in summary.by_graphs]
    assert all(m is not None for m in medians)
    for coarse, fine in zip(medians, medians[1:], strict=False):
        assert fine < coarse
    assert summary.by_graphs[-1]["failed_share"] == 0.0
    assert medians[-1] < 0.05

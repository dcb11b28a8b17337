"""Unit tests for exact enumeration: likelihoods, the posterior table, and exact EM."""

import itertools
import math

import numpy as np
import pytest

from sbmlab.core import LabeledGraph, SbmParams, sample_graph
from sbmlab.core.errors import DegenerateModelError, ShapeError, SizeLimitError
from sbmlab.inference import (
    PosteriorTable,
    alpha_deviation_bound,
    class_mass,
    complete_loglik,
    exact_em_fit,
    expected_contrast,
    kl_divergence,
    log_posterior_ratio,
    marginal_loglik,
    normalized_contrast,
    posterior_ratio_stat,
    posterior_table,
    prior_loglik,
)
from sbmlab.inference.exact import block_ratio, check_enumerable, em_m_step, label_index, label_vectors

from .conftest import AFFILIATION, TWO_CLASS, brute_log_marginal, random_graph, random_params


def test_label_vectors_are_most_significant_first():
    np.testing.assert_array_equal(label_vectors(2, 2), [[0, 0], [0, 1], [1, 0], [1, 1]])
    for k, z in enumerate(label_vectors(3, 3)):
        assert label_index(z, 3) == k


def test_enumeration_cap():
    assert check_enumerable(10, 2) == 1024
    with pytest.raises(SizeLimitError, match="enumeration cap"):
        check_enumerable(30, 2)
    with pytest.raises(SizeLimitError):
        marginal_loglik(LabeledGraph(np.zeros((5, 5), dtype=np.uint8)), TWO_CLASS, cap=31)


def test_marginal_matches_probability_space_enumeration(rng):
    for _ in range(50):
        n = int(rng.integers(1, 5))
        graph = random_graph(rng, n)
        params = random_params(rng, 2)
        assert marginal_loglik(graph, params) == pytest.approx(brute_log_marginal(graph, params), abs=1e-10)


def test_marginal_does_not_depend_on_chunking_or_threads(rng):
    graph = random_graph(rng, 7)
    params = random_params(rng, 3)
    reference = marginal_loglik(graph, params)
    assert marginal_loglik(graph, params, chunk_size=5, threads=3) == pytest.approx(reference, abs=1e-12)


def test_complete_loglik_by_hand():
    x = np.array([[0, 1], [0, 0]], dtype=np.uint8)
    graph = LabeledGraph(x)
    pi = np.array([[0.7, 0.4], [0.2, 0.9]])
    expected = math.log(0.4) + math.log(1 - 0.2)
    assert complete_loglik(graph, [0, 1], pi) == pytest.approx(expected, abs=1e-15)


def test_impossible_pairs_give_minus_infinity():
    graph = LabeledGraph(np.array([[0, 1], [0, 0]], dtype=np.uint8))
    pi = np.array([[0.0, 0.5], [0.5, 0.5]])
    assert complete_loglik(graph, [0, 0], pi) == -math.inf
    # 0 log 0 = 0: an absent pair in a zero block costs nothing.
    assert complete_loglik(LabeledGraph(np.zeros((2, 2), dtype=np.uint8)), [0, 0], pi) == 0.0


def test_all_impossible_posterior_is_degenerate():
    params = SbmParams(np.array([1.0]), np.array([[0.0]]))
    graph = LabeledGraph(np.array([[0, 1], [0, 0]], dtype=np.uint8))
    assert marginal_loglik(graph, params) == -math.inf
    with pytest.raises(DegenerateModelError):
        posterior_table(graph, params)


def test_complete_loglik_rejects_wrong_length():
    with pytest.raises(ShapeError):
        complete_loglik(LabeledGraph(np.zeros((3, 3), dtype=np.uint8)), [0, 1], TWO_CLASS.pi)


def test_posterior_table_normalizes_and_matches_ratios(rng):
    graph = random_graph(rng, 5)
    params = random_params(rng, 2)
    table = posterior_table(graph, params)
    assert len(table) == 32
    assert table.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert table.log_marginal == pytest.approx(marginal_loglik(graph, params), abs=1e-12)
    z, z_ref = [0, 1, 1, 0, 1], [1, 1, 0, 0, 0]
    assert math.log(table[z] / table[z_ref]) == pytest.approx(log_posterior_ratio(graph, z, z_ref, params), abs=1e-9)


def test_posterior_entries_follow_enumeration_order(rng):
    table = posterior_table(random_graph(rng, 3), random_params(rng, 2))
    entries = list(table.entries())
    assert [z for z, _ in entries] == list(itertools.product(range(2), repeat=3))
    np.testing.assert_allclose([p for _, p in entries], table.probs)


def test_marginals_rows_sum_to_one(rng):
    table = posterior_table(random_graph(rng, 4), random_params(rng, 3))
    marginals = table.marginals()
    assert marginals.shape == (4, 3)
    np.testing.assert_allclose(marginals.sum(axis=1), 1.0, atol=1e-12)
    assert table[table.map_labels()] == pytest.approx(table.probs.max())


def test_posterior_table_validates_its_input():
    with pytest.raises(ShapeError):
        PosteriorTable(2, 2, np.full(3, 1 / 3))
    with pytest.raises(Exception, match="sum"):
        PosteriorTable(1, 2, np.array([0.5, 0.6]))


def test_single_class_posterior_has_no_competitors():
    params = SbmParams(np.array([1.0]), np.array([[0.3]]))
    graph = sample_graph(params, 6, seed=1)
    table = posterior_table(graph.without_labels(), params)
    assert posterior_ratio_stat(table, graph.labels, params.pi) == 0.0
    assert class_mass(table, graph.labels, params.pi) == pytest.approx(1.0)


def test_class_mass_sums_the_symmetric_images():
    graph = sample_graph(AFFILIATION, 6, seed=4)
    table = posterior_table(graph.without_labels(), AFFILIATION)
    z = np.asarray(graph.labels)
    mass = class_mass(table, z, AFFILIATION.pi)
    assert mass == pytest.approx(table[z] + table[1 - z])
    assert posterior_ratio_stat(table, z, AFFILIATION.pi) == pytest.approx((1 - mass) / mass)


def test_zero_mass_truth_gives_infinite_ratio():
    params = SbmParams(np.array([0.5, 0.5]), np.array([[1.0, 0.0], [0.0, 1.0]]))
    graph = LabeledGraph(np.array([[0, 1], [1, 0]], dtype=np.uint8))
    table = posterior_table(graph, params)
    flags = []
    assert posterior_ratio_stat(table, [0, 1], params.pi, flags=flags) == math.inf
    assert flags == ["zero-mass-truth"]


def test_alpha_deviation_bound_holds(rng):
    for _ in range(20):
        params = random_params(rng, 2)
        graph = sample_graph(params, 5, seed=int(rng.integers(1000)))
        table = posterior_table(graph.without_labels(), params)
        lhs, rhs, ok = alpha_deviation_bound(table, graph.labels)
        assert ok and lhs <= rhs + 1e-12


def test_contrasts():
    graph = sample_graph(TWO_CLASS, 8, seed=2)
    z = graph.labels
    assert normalized_contrast(graph, z, TWO_CLASS.pi) == pytest.approx(
        complete_loglik(graph, z, TWO_CLASS.pi) / 56
    )
    # At the truth Φ is the negative mean Bernoulli entropy of the pair probabilities.
    entropy = -(0.8 * math.log(0.8) + 0.2 * math.log(0.2))
    assert expected_contrast(z, TWO_CLASS.pi, z, TWO_CLASS.pi) == pytest.approx(-entropy)
    assert prior_loglik([0, 1], [0.25, 0.75]) == pytest.approx(math.log(0.25 * 0.75))


def test_kl_of_a_table_with_itself_is_zero(rng):
    table = posterior_table(random_graph(rng, 4), random_params(rng, 2))
    assert kl_divergence(table, table) == 0.0


def test_kl_support_violation_is_infinite():
    params = SbmParams(np.array([0.5, 0.5]), np.array([[1.0, 0.0], [0.0, 1.0]]))
    graph = LabeledGraph(np.array([[0, 1], [1, 0]], dtype=np.uint8))
    table = posterior_table(graph, params)
    flags = []
    assert kl_divergence(np.full((2, 2), 0.5), table, flags=flags) == math.inf
    assert flags == ["kl-support"]
    # Without a list the result is unchanged.
    assert kl_divergence(np.full((2, 2), 0.5), table) == math.inf


def test_block_ratio_flags_empty_blocks():
    flags = []
    pi = block_ratio(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[2.0, 1.0], [1.0, 0.0]]), flags)
    np.testing.assert_allclose(pi, [[0.5, 0.0], [0.0, 0.5]])
    assert flags == ["empty-block:2,2"]


def test_exact_em_ascends_and_converges(rng):
    for _ in range(50):
        n = int(rng.integers(3, 7))
        graph = sample_graph(TWO_CLASS, n, seed=int(rng.integers(1000))).without_labels()
        fit = exact_em_fit(graph, random_params(rng, 2))
        assert fit.is_monotone()
        assert fit.method == "exact-em" and fit.restarts_used == 1
        assert fit.objective == pytest.approx(marginal_loglik(graph, fit.params), abs=1e-9)
        np.testing.assert_allclose(fit.tau.sum(axis=1), 1.0, atol=1e-12)


def test_exact_em_from_the_truth_does_not_lose_likelihood():
    truth = SbmParams(np.array([0.5, 0.5]), np.array([[0.9, 0.1], [0.1, 0.9]]))
    graph = sample_graph(truth, 10, seed=3).without_labels()
    fit = exact_em_fit(graph, truth)
    assert marginal_loglik(graph, fit.params) >= marginal_loglik(graph, truth) - 1e-12


def test_exact_em_alpha_is_the_mean_posterior_membership():
    graph = sample_graph(TWO_CLASS, 8, seed=7).without_labels()
    table = posterior_table(graph, TWO_CLASS)
    params, memberships, _ = em_m_step(graph, table)
    np.testing.assert_allclose(params.alpha, table.marginals().mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(memberships, table.marginals(), atol=1e-12)
    # At convergence α̂ reproduces itself.
    fit = exact_em_fit(graph, TWO_CLASS, max_iter=5000, tol=1e-12)
    np.testing.assert_allclose(fit.params.alpha, fit.tau.mean(axis=0), atol=1e-5)


def test_exact_em_respects_the_cap():
    with pytest.raises(SizeLimitError):
        exact_em_fit(LabeledGraph(np.zeros((30, 30), dtype=np.uint8)), TWO_CLASS)

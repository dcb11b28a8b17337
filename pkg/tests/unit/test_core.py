"""Unit tests for the block-model core: parameter and graph types, sampling, label switching, assumptions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmlab.core import (
    LabeledGraph,
    Permutation,
    SbmParams,
    all_permutations,
    check_assumptions,
    class_counts,
    empirical_alpha,
    equivalence_class,
    label_error,
    param_distance,
    sample_batch,
    sample_graph,
    streams,
    symmetry_group,
)
from sbmlab.core.errors import InvalidBoundError, ParameterError, ShapeError, SizeLimitError
from sbmlab.core.rng import resolve_seed

from .conftest import AFFILIATION, TWO_CLASS, random_params

# --- SbmParams -------------------------------------------------------------


def test_params_are_read_only():
    with pytest.raises(ValueError):
        TWO_CLASS.pi[0, 0] = 0.1


@pytest.mark.parametrize(
    "alpha, pi",
    [
        ([0.5, 0.6], [[0.5, 0.5], [0.5, 0.5]]),
        ([1.0, 0.0], [[0.5, 0.5], [0.5, 0.5]]),
        ([0.5, 0.5], [[0.5, 1.5], [0.5, 0.5]]),
        ([0.5, 0.5], [[0.5, 0.5]]),
        ([], []),
        ([0.5, 0.5], [[0.5, float("nan")], [0.5, 0.5]]),
    ],
)
def test_invalid_params_are_rejected(alpha, pi):
    with pytest.raises(ParameterError):
        SbmParams(np.array(alpha, dtype=float), np.array(pi, dtype=float))


def test_declared_q_must_match():
    with pytest.raises(ParameterError, match="declared q=3"):
        SbmParams.from_lists([0.5, 0.5], [[0.1, 0.2], [0.3, 0.4]], q=3)


def test_profile_is_pi_times_alpha():
    params = SbmParams(np.array([0.25, 0.75]), np.array([[0.8, 0.4], [0.2, 0.6]]))
    np.testing.assert_allclose(params.r, [0.8 * 0.25 + 0.4 * 0.75, 0.2 * 0.25 + 0.6 * 0.75])
    np.testing.assert_array_equal(params.transposed().pi, params.pi.T)


# --- LabeledGraph ----------------------------------------------------------


def test_graph_rejects_self_loops_and_non_binary_entries():
    with pytest.raises(ParameterError, match="self-loops"):
        LabeledGraph(np.eye(3, dtype=np.uint8))
    with pytest.raises(ParameterError, match="0 or 1"):
        LabeledGraph(np.array([[0, 2], [0, 0]]))
    with pytest.raises(ParameterError, match="square"):
        LabeledGraph(np.zeros((2, 3)))


def test_graph_label_checks():
    x = np.zeros((3, 3), dtype=np.uint8)
    with pytest.raises(ShapeError):
        LabeledGraph(x, np.array([0, 1]))
    with pytest.raises(ParameterError):
        LabeledGraph(x, np.array([0, 1, 2]), q=2)
    assert LabeledGraph(x, np.array([0, 1, 1])).q == 2


def test_graph_density_and_hidden_labels():
    x = np.array([[0, 1, 1], [0, 0, 0], [1, 0, 0]], dtype=np.uint8)
    graph = LabeledGraph(x, np.array([0, 1, 0]), q=2)
    assert graph.edge_count == 3
    assert graph.density == pytest.approx(3 / 6)
    hidden = graph.without_labels()
    assert hidden.labels is None and hidden.q == 2
    np.testing.assert_array_equal(graph.transposed().adjacency, x.T)


def test_class_counts_and_empirical_alpha():
    z = np.array([0, 2, 2, 1, 2])
    np.testing.assert_array_equal(class_counts(z, 3), [1, 1, 3])
    np.testing.assert_allclose(empirical_alpha(z, 3), [0.2, 0.2, 0.6])
    np.testing.assert_array_equal(empirical_alpha([], 2), [0.0, 0.0])


# --- Seeded sampling -------------------------------------------------------


def test_sampling_is_deterministic():
    a = sample_graph(TWO_CLASS, 40, seed=7)
    b = sample_graph(TWO_CLASS, 40, seed=7)
    np.testing.assert_array_equal(a.adjacency, b.adjacency)
    np.testing.assert_array_equal(a.labels, b.labels)
    c = sample_graph(TWO_CLASS, 40, seed=8)
    assert not np.array_equal(a.adjacency, c.adjacency)


def test_sampled_graph_is_valid():
    graph = sample_graph(TWO_CLASS, 25, seed=3)
    assert graph.n == 25 and graph.q == 2
    assert not np.any(np.diagonal(graph.adjacency))
    assert set(np.unique(graph.labels)) <= {0, 1}


def test_edge_coin_depends_only_on_the_pair():
    """Reusing the label stream, each pair's coin sits at position i*n + j of the edge stream."""
    rng = streams(11)
    uniforms = rng.edges.random((6, 6))
    graph = sample_graph(TWO_CLASS, 6, seed=11)
    z = graph.labels
    expected = (uniforms < TWO_CLASS.pi[np.ix_(z, z)]).astype(np.uint8)
    np.fill_diagonal(expected, 0)
    np.testing.assert_array_equal(graph.adjacency, expected)


def test_each_pair_coin_can_be_read_on_its_own():
    n = 7
    graph = sample_graph(TWO_CLASS, n, seed=11)
    rng = streams(11)
    z = graph.labels
    for i in range(n):
        for j in range(n):
            if i != j:
                edge = rng.edge_coin(n, i, j) < TWO_CLASS.pi[z[i], z[j]]
                assert graph.adjacency[i, j] == edge
    assert rng.edge_coin(n, 2, 5) == rng.edges.random((n, n))[2, 5]
    with pytest.raises(ValueError):
        rng.edge_coin(n, 3, 3)


def test_within_class_edge_frequency_matches_pi():
    graph = sample_graph(TWO_CLASS, 500, seed=1)
    z = graph.labels
    same = z[:, None] == z[None, :]
    np.fill_diagonal(same, False)
    assert abs(graph.adjacency[same].mean() - 0.8) < 0.03


def test_class_frequencies_concentrate_around_alpha():
    params = SbmParams(np.array([0.3, 0.7]), np.array([[0.5, 0.5], [0.5, 0.5]]))
    n = 1000
    band = 4 * np.sqrt(params.alpha * (1 - params.alpha) / n)
    inside = sum(
        bool(np.all(np.abs(empirical_alpha(sample_graph(params, n, seed=s).labels, 2) - params.alpha) <= band))
        for s in range(200)
    )
    assert inside >= 198


def test_degenerate_pi_is_respected():
    params = SbmParams(np.array([1.0]), np.array([[1.0]]))
    graph = sample_graph(params, 5, seed=0)
    assert graph.edge_count == 20
    empty = sample_graph(SbmParams(np.array([1.0]), np.array([[0.0]])), 5, seed=0)
    assert empty.edge_count == 0


def test_empty_graph():
    graph = sample_graph(TWO_CLASS, 0, seed=0)
    assert graph.n == 0 and graph.edge_count == 0


def test_negative_n_is_rejected():
    with pytest.raises(ValueError):
        sample_graph(TWO_CLASS, -1, seed=0)


def test_batches_have_the_right_shape():
    labels, x = sample_batch(TWO_CLASS, 5, 3, streams(0).graph(0))
    assert labels.shape == (3, 5) and x.shape == (3, 5, 5)
    assert not x[:, np.arange(5), np.arange(5)].any()


def test_streams_are_independent_by_key():
    root = streams(5)
    assert root.restart(1).random() != root.restart(2).random()
    assert root.cell(1, 2).labels.random() == streams(5).cell(1, 2).labels.random()
    assert root.graph(0).edges.random() != root.graph(1).edges.random()


def test_seed_resolution_order():
    assert resolve_seed(3, 4, {"SBM_LAB_SEED": "5"}) == 3
    assert resolve_seed(None, 4, {"SBM_LAB_SEED": "5"}) == 4
    assert resolve_seed(None, None, {"SBM_LAB_SEED": "5"}) == 5
    assert resolve_seed(None, None, {}) == 0
    with pytest.raises(ValueError, match="SBM_LAB_SEED"):
        resolve_seed(None, None, {"SBM_LAB_SEED": "five"})


# --- Label switching -------------------------------------------------------


def test_permutation_algebra():
    sigma = Permutation((1, 2, 0))
    assert sigma.compose(sigma.inverse()).is_identity
    np.testing.assert_array_equal(sigma.apply([0, 1, 2, 2]), [1, 2, 0, 0])
    assert str(sigma) == "(2 3 1)"
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), q=st.integers(1, 4))
def test_label_switching_preserves_the_profile(seed, q):
    """Permuting α and π together permutes r = π·α the same way."""
    rng = np.random.default_rng(seed)
    params = random_params(rng, q)
    for sigma in all_permutations(q):
        permuted = sigma.permute_params(params)
        np.testing.assert_allclose(permuted.r, params.r[list(sigma.mapping)], atol=1e-14)


def test_symmetry_group_of_affiliation_model():
    group = symmetry_group(AFFILIATION.pi)
    assert [g.mapping for g in group] == [(0, 1), (1, 0)]
    asymmetric = np.array([[0.9, 0.1], [0.2, 0.8]])
    assert [g.mapping for g in symmetry_group(asymmetric)] == [(0, 1)]


def test_symmetry_group_is_closed_under_composition():
    affiliation = np.array([[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9]])
    partial = np.array([[0.9, 0.1, 0.3], [0.1, 0.9, 0.3], [0.2, 0.2, 0.5]])
    for pi in (affiliation, partial):
        mappings = {g.mapping for g in symmetry_group(pi)}
        for g in symmetry_group(pi):
            assert g.inverse().mapping in mappings
            for h in symmetry_group(pi):
                assert g.compose(h).mapping in mappings
    assert len(symmetry_group(affiliation)) == 6
    assert {g.mapping for g in symmetry_group(partial)} == {(0, 1, 2), (1, 0, 2)}


def test_equivalence_class_size():
    assert len(equivalence_class([0, 0, 1], AFFILIATION.pi)) == 2
    assert len(equivalence_class([0, 0, 1], np.array([[0.9, 0.1], [0.2, 0.8]]))) == 1


def test_param_distance_is_zero_after_relabeling():
    sigma = Permutation((1, 0))
    params = SbmParams(np.array([0.3, 0.7]), np.array([[0.8, 0.1], [0.3, 0.6]]))
    err_pi, err_alpha, best = param_distance(sigma.permute_params(params), params)
    assert err_pi == 0.0 and err_alpha == 0.0
    assert best == sigma


def test_param_distance_is_symmetric(rng):
    for _ in range(50):
        a, b = random_params(rng, 3), random_params(rng, 3)
        ab, ba = param_distance(a, b), param_distance(b, a)
        assert ab[0] == pytest.approx(ba[0], abs=1e-12)
        assert ab[1] == pytest.approx(ba[1], abs=1e-12)


def test_param_distance_worked_example():
    a = SbmParams(np.array([0.3, 0.7]), np.array([[0.8, 0.1], [0.3, 0.6]]))
    b = SbmParams(np.array([0.3, 0.7]), np.array([[0.85, 0.1], [0.3, 0.6]]))
    err_pi, err_alpha, best = param_distance(a, b)
    assert err_pi == pytest.approx(0.05, abs=1e-12)
    assert err_alpha == 0.0 and best.is_identity


def test_param_distance_rejects_mismatched_q():
    with pytest.raises(ShapeError):
        param_distance(TWO_CLASS, SbmParams(np.array([1.0]), np.array([[0.5]])))


def test_permutation_limit():
    with pytest.raises(SizeLimitError):
        all_permutations(4, max_q=3)


def test_label_error_quotients_symmetries():
    assert label_error([1, 1, 0], [0, 0, 1], AFFILIATION.pi) == 0.0
    assert label_error([1, 1, 0], [0, 0, 1], np.array([[0.9, 0.1], [0.2, 0.8]])) == 1.0
    assert label_error([], [], AFFILIATION.pi) == 0.0


# --- Assumptions -----------------------------------------------------------


def test_constant_pi_violates_a1():
    params = SbmParams.uniform(np.full((2, 2), 0.5))
    report = check_assumptions(params, zeta=0.1, gamma=0.2)
    assert not report.a1_ok and not report.ok
    assert any(name == "A1" for name, _ in report.violations)


def test_well_separated_truth_passes():
    report = check_assumptions(TWO_CLASS, [0, 1, 0, 1], zeta=0.1, gamma=0.3)
    assert report.ok and report.a4_ok


def test_a2_ignores_zero_and_one_entries():
    params = SbmParams.uniform(np.array([[1.0, 0.0], [0.5, 0.02]]))
    report = check_assumptions(params, zeta=0.1, gamma=0.2)
    assert report.a1_ok
    assert [name for name, _ in report.violations] == ["A2"]


def test_a3_and_a4():
    params = SbmParams(np.array([0.1, 0.9]), TWO_CLASS.pi)
    report = check_assumptions(params, [0, 0, 0, 1], zeta=0.1, gamma=0.3)
    names = [name for name, _ in report.violations]
    assert "A3" in names and "A4" in names


def test_a4_only_applies_from_n0():
    report = check_assumptions(TWO_CLASS, [0, 0, 0], zeta=0.1, gamma=0.3, n0=10)
    assert report.a4_ok and report.ok
    assert report.notes


@pytest.mark.parametrize("zeta, gamma, n0", [(0.0, 0.2, 1), (0.6, 0.2, 1), (0.1, 0.5, 1), (0.1, 0.2, 0)])
def test_bounds_are_validated(zeta, gamma, n0):
    with pytest.raises(InvalidBoundError):
        check_assumptions(TWO_CLASS, zeta=zeta, gamma=gamma, n0=n0)

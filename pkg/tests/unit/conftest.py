"""Shared parameter sets and instance generators for the unit tests."""

import itertools
import math

import numpy as np
import pytest

from sbmlab.core import LabeledGraph, SbmParams

#: The well-separated two-class truth used throughout.
TWO_CLASS = SbmParams(np.array([0.5, 0.5]), np.array([[0.8, 0.2], [0.2, 0.8]]))

#: Balanced affiliation model: both classes share the out-degree profile.
AFFILIATION = SbmParams(np.array([0.5, 0.5]), np.array([[0.9, 0.1], [0.1, 0.9]]))


def random_params(rng, q, low=0.05, high=0.95, alpha_low=0.0):
    """Random (α, π) with π entries in [low, high] and every α_q above ``alpha_low``."""
    raw = rng.uniform(0.2, 1.0, size=q)
    alpha = raw / raw.sum()
    if alpha_low:
        alpha = alpha_low + (1 - q * alpha_low) * alpha
    return SbmParams(alpha / alpha.sum(), rng.uniform(low, high, size=(q, q)))


def random_graph(rng, n, density=0.5):
    x = (rng.random((n, n)) < density).astype(np.uint8)
    np.fill_diagonal(x, 0)
    return LabeledGraph(x)


def brute_log_marginal(graph, params):
    """L2 computed in linear probability space, one label vector at a time."""
    x = graph.adjacency
    n, q = graph.n, params.q
    total = 0.0
    for z in itertools.product(range(q), repeat=n):
        p = math.prod(params.alpha[k] for k in z)
        for i in range(n):
            for j in range(n):
                if i != j:
                    edge = params.pi[z[i], z[j]]
                    p *= edge if x[i, j] else 1.0 - edge
        total += p
    return math.log(total)


def best_complete_labels(graph, pi):
    """ẑ = argmax over z of L1(X; z, π), by brute force."""
    from sbmlab.inference import complete_loglik

    q = np.asarray(pi).shape[0]
    candidates = itertools.product(range(q), repeat=graph.n)
    return np.array(max(candidates, key=lambda z: complete_loglik(graph, z, pi)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_class():
    return TWO_CLASS

"""Unit tests for the file formats: params, graphs, labels, fits, moments, and the posterior CSV."""

import json
import math

import numpy as np
import pytest

from sbmlab import serialize
from sbmlab.core import LabeledGraph, SbmParams, sample_graph
from sbmlab.core.errors import FormatError, ParameterError
from sbmlab.inference import posterior_table, vem_fit
from sbmlab.moments import moments_analytic, moments_empirical, recover_from_moments

from .conftest import TWO_CLASS


def test_floats_keep_every_digit():
    assert serialize.format_float(0.1) == "0.10000000000000001"
    assert float(serialize.format_float(1 / 3)) == 1 / 3
    assert serialize.format_float(math.inf) == "Infinity"
    assert serialize.format_float(-math.inf) == "-Infinity"
    assert serialize.format_float(math.nan) == "NaN"


def test_cells():
    assert serialize.format_cell(None) == ""
    assert serialize.format_cell(np.int64(3)) == "3"
    assert serialize.format_cell(True) == "true"
    assert serialize.format_cell("vem") == "vem"
    assert serialize.format_summary(None) == "-"
    assert serialize.format_summary(0.123456) == "0.1235"


def test_dumps_is_valid_json_with_infinities():
    payload = {"a": np.array([1.0, math.inf]), "b": [[1, 2], [3, 4]], "c": None, "d": np.float64(0.5)}
    decoded = json.loads(serialize.dumps(payload))
    assert decoded == {"a": [1.0, math.inf], "b": [[1, 2], [3, 4]], "c": None, "d": 0.5}
    assert "\n" not in serialize.dumps_line(payload)
    assert json.loads(serialize.dumps_line(payload)) == decoded


def test_params_file(tmp_path):
    path = tmp_path / "params.json"
    serialize.write_params(path, TWO_CLASS)
    assert serialize.read_params(path) == TWO_CLASS
    assert json.loads(path.read_text())["q"] == 2


@pytest.mark.parametrize(
    "text, error",
    [
        ('{"alpha": [1.0]}', FormatError),
        ('{"alpha": [1.0], "pi": "x"}', FormatError),
        ('{"q": "2", "alpha": [0.5, 0.5], "pi": [[0.5, 0.5], [0.5, 0.5]]}', FormatError),
        ("[1, 2]", FormatError),
        ("{not json", FormatError),
        ('{"q": 3, "alpha": [0.5, 0.5], "pi": [[0.5, 0.5], [0.5, 0.5]]}', ParameterError),
        ('{"alpha": [0.5, 0.6], "pi": [[0.5, 0.5], [0.5, 0.5]]}', ParameterError),
    ],
)
def test_bad_params_files(tmp_path, text, error):
    path = tmp_path / "params.json"
    path.write_text(text)
    with pytest.raises(error):
        serialize.read_params(path)


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(FormatError, match="cannot read"):
        serialize.read_params(tmp_path / "absent.json")


def test_graph_text_layout():
    x = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=np.uint8)
    graph = LabeledGraph(x, np.array([0, 1, 1]), q=2)
    assert serialize.graph_to_text(graph) == "n=3 q=2\n1\t2\n2\t3\n3\t1\nlabels:\n1 2 2\n"
    assert serialize.graph_to_text(graph, include_labels=False) == "n=3 q=2\n1\t2\n2\t3\n3\t1\n"
    assert serialize.graph_to_text(LabeledGraph(x)).startswith("n=3 q=0\n")


def test_graph_file(tmp_path):
    graph = sample_graph(TWO_CLASS, 15, seed=4)
    path = tmp_path / "g.graph"
    serialize.write_graph(path, graph)
    loaded = serialize.read_graph(path)
    np.testing.assert_array_equal(loaded.adjacency, graph.adjacency)
    np.testing.assert_array_equal(loaded.labels, graph.labels)
    assert loaded.q == 2
    np.testing.assert_array_equal(serialize.read_labels(path), graph.labels)


def test_graph_parser_skips_comments_and_blank_lines():
    graph = serialize.graph_from_text("# made by hand\nn=2 q=0\n\n1 2\n")
    assert graph.edge_count == 1 and graph.q is None


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("n=2\n", "header"),
        ("n=2 q=1\n1\t2\t3\n", "i<TAB>j"),
        ("n=2 q=1\n1\tb\n", "integers"),
        ("n=2 q=1\n1\t3\n", "out of range"),
        ("n=2 q=1\n2\t2\n", "self-loop"),
        ("n=2 q=1\nlabels:\n1\n", "expected 2 labels"),
        ("n=2 q=1\nlabels:\n1 2\n", "exceeds"),
        ("n=2 q=1\nlabels:\n0 1\n", "1-based"),
    ],
)
def test_graph_parser_errors(text, match):
    with pytest.raises(FormatError, match=match):
        serialize.graph_from_text(text)


def test_plain_label_files(tmp_path):
    path = tmp_path / "labels.txt"
    path.write_text("1 2\n2 1\n")
    np.testing.assert_array_equal(serialize.read_labels(path, q=2), [0, 1, 1, 0])
    with pytest.raises(FormatError):
        serialize.read_labels(path, q=1)
    unlabeled = tmp_path / "g.graph"
    unlabeled.write_text("n=2 q=0\n1\t2\n")
    with pytest.raises(FormatError, match="no labels"):
        serialize.read_labels(unlabeled)


def test_fit_file(tmp_path):
    graph = sample_graph(TWO_CLASS, 12, seed=1).without_labels()
    fit = vem_fit(graph, 2, restarts=2, seed=0)
    path = tmp_path / "fit.json"
    serialize.write_fit(path, fit)
    data = json.loads(path.read_text())
    assert data["labels"] == (fit.labels() + 1).tolist()
    assert data["j_final"] == fit.objective
    loaded = serialize.read_fit(path)
    assert loaded.params == fit.params
    assert loaded.objective_trace == fit.objective_trace
    assert loaded.tau is None and loaded.method == "vem"


def test_moment_files(tmp_path):
    path = tmp_path / "m.json"
    m = moments_empirical(TWO_CLASS, graphs=200, n=4, seed=0)
    serialize.write_moments(path, m)
    loaded = serialize.read_moments(path)
    np.testing.assert_array_equal(loaded.u, m.u)
    np.testing.assert_array_equal(loaded.bigU, m.bigU)
    assert (loaded.c, loaded.d, loaded.sample_count) == (m.c, m.d, 200)
    np.testing.assert_array_equal(loaded.stderr.u, m.stderr.u)
    assert json.loads(path.read_text())["U"] == m.bigU.tolist()


def test_bad_moment_files():
    with pytest.raises(FormatError, match="missing"):
        serialize.moments_from_dict({"q": 1, "u": [1.0, 0.5]})
    with pytest.raises(FormatError, match=r"u\[0\]"):
        serialize.moments_from_dict({"q": 1, "u": [0.5, 0.5], "U": [[0.5]]})


def test_recovery_payload():
    result = recover_from_moments(moments_analytic(SbmParams(np.array([0.3, 0.7]), np.array([[0.8, 0.2], [0.2, 0.6]]))))
    payload = serialize.recovery_to_dict(result)
    assert set(payload) == {"q", "alpha", "pi", "r", "residuals", "flags", "normalized_det"}
    assert payload["flags"] == []


def test_posterior_csv(tmp_path):
    graph = sample_graph(TWO_CLASS, 3, seed=0).without_labels()
    table = posterior_table(graph, TWO_CLASS)
    path = tmp_path / "post.csv"
    serialize.write_posterior(path, table)
    lines = path.read_text().splitlines()
    assert lines[0] == "labels,probability"
    assert len(lines) == 9
    assert lines[1].startswith("1 1 1,")
    assert lines[-1].startswith("2 2 2,")
    assert sum(float(line.split(",")[1]) for line in lines[1:]) == pytest.approx(1.0)

"""Bridge between files and the in-memory types.

Every file format sbmlab reads or writes lives here, in one place:

- params JSON: ``{"q": 2, "alpha": [...], "pi": [[...], ...]}``
- graph text: a ``n=<int> q=<int>`` header, one ``i<TAB>j`` line per directed
  edge, and an optional ``labels:`` section with n integers
- fit JSON, MomentSet JSON, RecoveryResult JSON
- posterior CSV (label vector, probability) and the sweep CSV

Floats are written with 17 significant digits, which round-trips every
double; non-finite values use the ``Infinity``/``-Infinity``/``NaN`` tokens
:mod:`json` reads back. Labels are 0-based in memory and 1-based in every
file.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .core.errors import FormatError, ParameterError
from .core.graph import LabeledGraph
from .core.params import SbmParams
from .inference.exact import PosteriorTable
from .inference.results import FitResult
from .moments.estimate import MomentErrors, MomentSet
from .moments.recover import RecoveryResult

#: The sweep CSV header, in column order.
SWEEP_COLUMNS = (
    "n",
    "seed",
    "method",
    "err_pi",
    "err_alpha",
    "label_err",
    "objective",
    "kl_gap",
    "ratio_stat",
    "wall_ms",
    "flags",
)


# --- Scalars and JSON ------------------------------------------------------


def format_float(x: float) -> str:
    """17 significant digits, or ``Infinity``/``-Infinity``/``NaN``."""
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def format_cell(value: Any) -> str:
    """A CSV cell: empty for ``None``, 17 digits for floats."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def format_summary(value: Any) -> str:
    """A short human-readable rendering for summary tables."""
    if value is None:
        return "-"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.4g}"
    return str(value)


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _encode(value: Any, indent: int, level: int) -> str:
    if value is None or isinstance(value, (bool, str, int)) and not isinstance(value, float):
        return json.dumps(value)
    if isinstance(value, float):
        return format_float(value)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in value) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(payload: Any, indent: int = 2) -> str:
    """JSON text with every float at 17 significant digits."""
    return _encode(_plain(payload), indent, 0)


def dumps_line(payload: Any) -> str:
    """Single-line JSON (for JSON-lines files), floats at 17 significant digits."""
    return " ".join(line.strip() for line in dumps(payload, indent=0).splitlines())


def write_json(path: str | Path, payload: Any) -> None:
    Path(path).write_text(dumps(payload) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    """
    Parse a JSON file.

    :raises FormatError: If the file cannot be read or is not JSON.
    """
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise FormatError(path, f"cannot read file: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(path, f"not valid JSON: {e}") from e


def _require(data: Any, path, *keys: str) -> None:
    if not isinstance(data, dict):
        raise FormatError(path, "expected a JSON object")
    missing = [k for k in keys if k not in data]
    if missing:
        raise FormatError(path, f"missing key(s): {', '.join(missing)}")


# --- Params ----------------------------------------------------------------


def params_to_dict(params: SbmParams) -> dict:
    return {"q": params.q, "alpha": params.alpha, "pi": params.pi}


def params_from_dict(data: Any, path: str | Path = "<params>") -> SbmParams:
    """
    Build params from a decoded params object.

    :raises FormatError: If keys are missing or values are not numeric arrays.
    :raises ParameterError: If the arrays violate the parameter invariants.
    """
    _require(data, path, "alpha", "pi")
    try:
        alpha = np.asarray(data["alpha"], dtype=float)
        pi = np.asarray(data["pi"], dtype=float)
    except (TypeError, ValueError) as e:
        raise FormatError(path, f"alpha and pi must be numeric arrays: {e}") from e
    q = data.get("q")
    if q is not None and (not isinstance(q, int) or isinstance(q, bool)):
        raise FormatError(path, f"q must be an integer, got {q!r}")
    return SbmParams.from_lists(alpha, pi, q)


def read_params(path: str | Path) -> SbmParams:
    return params_from_dict(read_json(path), path)


def write_params(path: str | Path, params: SbmParams) -> None:
    write_json(path, params_to_dict(params))


# --- Graphs and labels -----------------------------------------------------


def graph_to_text(graph: LabeledGraph, include_labels: bool = True) -> str:
    """
    The graph file text.

    The header carries ``q=0`` when the class count is unknown.
    """
    lines = [f"n={graph.n} q={graph.q or 0}"]
    rows, cols = np.nonzero(graph.adjacency)
    lines.extend(f"{i + 1}\t{j + 1}" for i, j in zip(rows.tolist(), cols.tolist(), strict=True))
    if include_labels and graph.labels is not None:
        lines.append("labels:")
        lines.append(" ".join(str(int(z) + 1) for z in graph.labels))
    return "\n".join(lines) + "\n"


def _parse_header(line: str, path) -> tuple[int, int]:
    fields = dict(part.split("=", 1) for part in line.split() if "=" in part)
    try:
        n, q = int(fields["n"]), int(fields["q"])
    except (KeyError, ValueError) as e:
        raise FormatError(path, f"header must read 'n=<int> q=<int>', got {line!r}") from e
    if n < 0 or q < 0:
        raise FormatError(path, f"n and q must be non-negative, got {line!r}")
    return n, q


def graph_from_text(text: str, path: str | Path = "<graph>") -> LabeledGraph:
    """
    Parse graph file text.

    :raises FormatError: On a bad header, malformed or out-of-range edges,
        self-loops, or a labels section of the wrong length.
    """
    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line and not line.startswith("#")]
    if not lines:
        raise FormatError(path, "empty graph file")
    n, q = _parse_header(lines[0], path)
    x = np.zeros((n, n), dtype=np.uint8)
    labels = None
    body = lines[1:]
    for index, line in enumerate(body):
        if line == "labels:":
            labels = read_label_tokens(" ".join(body[index + 1 :]).split(), path, n, q or None)
            break
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(path, f"edge lines must read 'i<TAB>j', got {line!r}")
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
        except ValueError as e:
            raise FormatError(path, f"edge endpoints must be integers, got {line!r}") from e
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(path, f"edge {line!r} is out of range for n={n}")
        if i == j:
            raise FormatError(path, f"self-loop {line!r} is not allowed")
        x[i, j] = 1
    return LabeledGraph(x, labels, q or None)


def read_graph(path: str | Path) -> LabeledGraph:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(path, f"cannot read file: {e.strerror or e}") from e
    return graph_from_text(text, path)


def write_graph(path: str | Path, graph: LabeledGraph, include_labels: bool = True) -> None:
    Path(path).write_text(graph_to_text(graph, include_labels), encoding="utf-8")


def read_label_tokens(tokens: list[str], path, n: int | None = None, q: int | None = None) -> np.ndarray:
    """1-based label tokens -> 0-based array, checked against n and q when given."""
    try:
        z = np.array([int(t) for t in tokens], dtype=np.int64) - 1
    except ValueError as e:
        raise FormatError(path, f"labels must be integers: {e}") from e
    if n is not None and z.size != n:
        raise FormatError(path, f"expected {n} labels, got {z.size}")
    if z.size and z.min() < 0:
        raise FormatError(path, "labels are 1-based and must be at least 1")
    if q is not None and z.size and z.max() >= q:
        raise FormatError(path, f"label {int(z.max()) + 1} exceeds q={q}")
    return z


def read_labels(path: str | Path, q: int | None = None) -> np.ndarray:
    """
    Read a label vector: a graph file with a labels section, or whitespace-separated 1-based integers.

    :raises FormatError: If the file is unreadable or a graph file has no labels.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(path, f"cannot read file: {e.strerror or e}") from e
    if text.lstrip().startswith("n="):
        graph = graph_from_text(text, path)
        if graph.labels is None:
            raise FormatError(path, "graph file has no labels section")
        labels = np.asarray(graph.labels)
        if q is not None and labels.size and labels.max() >= q:
            raise FormatError(path, f"label {int(labels.max()) + 1} exceeds q={q}")
        return labels
    return read_label_tokens(text.split(), path, None, q)


# --- Fits ------------------------------------------------------------------


def fit_to_dict(fit: FitResult) -> dict:
    payload = {
        "method": fit.method,
        **params_to_dict(fit.params),
        "j_final": fit.objective,
        "trace": fit.objective_trace,
        "iterations": fit.iterations,
        "restarts_used": fit.restarts_used,
        "converged": fit.converged,
        "flags": fit.flags,
        "restart_objectives": fit.restart_objectives,
    }
    if fit.tau is not None:
        payload["labels"] = (fit.labels() + 1).tolist()
    return payload


def write_fit(path: str | Path, fit: FitResult) -> None:
    write_json(path, fit_to_dict(fit))


def read_fit(path: str | Path) -> FitResult:
    """
    Read a fit file. The membership matrix is not stored, so ``tau`` is ``None``.

    :raises FormatError: If required keys are missing.
    """
    data = read_json(path)
    _require(data, path, "alpha", "pi", "trace", "restarts_used", "converged")
    return FitResult(
        params=params_from_dict(data, path),
        objective_trace=[float(v) for v in data["trace"]],
        iterations=int(data.get("iterations", len(data["trace"]) - 1)),
        restarts_used=int(data["restarts_used"]),
        converged=bool(data["converged"]),
        method=str(data.get("method", "vem")),
        flags=list(data.get("flags", [])),
        restart_objectives=[float(v) for v in data.get("restart_objectives", [])],
    )


# --- Moments and recovery --------------------------------------------------


def moments_to_dict(m: MomentSet) -> dict:
    payload: dict[str, Any] = {
        "q": m.q,
        "u": m.u,
        "U": m.bigU,
        "c": m.c,
        "d": m.d,
        "source": m.source,
        "orientation": m.orientation,
    }
    if m.sample_count is not None:
        payload["sample_count"] = m.sample_count
    if m.stderr is not None:
        payload["stderr"] = {"u": m.stderr.u, "U": m.stderr.bigU, "c": m.stderr.c, "d": m.stderr.d}
    return payload


def moments_from_dict(data: Any, path: str | Path = "<moments>") -> MomentSet:
    _require(data, path, "q", "u", "U")
    try:
        stderr = data.get("stderr")
        errors = (
            MomentErrors(np.asarray(stderr["u"], float), np.asarray(stderr["U"], float), stderr["c"], stderr.get("d"))
            if stderr
            else None
        )
        return MomentSet(
            q=int(data["q"]),
            u=np.asarray(data["u"], dtype=float),
            bigU=np.asarray(data["U"], dtype=float),
            c=data.get("c"),
            d=data.get("d"),
            source=data.get("source", "analytic"),
            sample_count=data.get("sample_count"),
            stderr=errors,
            orientation=data.get("orientation", "row"),
        )
    except (TypeError, ValueError, KeyError) as e:
        raise FormatError(path, f"malformed moment set: {e}") from e
    except ParameterError as e:
        raise FormatError(path, str(e)) from e


def read_moments(path: str | Path) -> MomentSet:
    return moments_from_dict(read_json(path), path)


def write_moments(path: str | Path, m: MomentSet) -> None:
    write_json(path, moments_to_dict(m))


def recovery_to_dict(result: RecoveryResult) -> dict:
    return {
        **params_to_dict(result.params),
        "r": result.r_roots,
        "residuals": result.residuals,
        "flags": result.condition_flags,
        "normalized_det": result.normalized_det,
    }


def write_recovery(path: str | Path, result: RecoveryResult) -> None:
    write_json(path, recovery_to_dict(result))


# --- CSV outputs -----------------------------------------------------------


def write_posterior(path: str | Path, table: PosteriorTable, nonzero: bool = False) -> None:
    """
    Write a posterior as ``labels,probability`` rows in enumeration order.

    Label vectors are written as space-separated 1-based labels.
    """
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["labels", "probability"])
        for z, p in table.entries(nonzero=nonzero):
            writer.writerow([" ".join(str(v + 1) for v in z), format_float(p)])


class SweepWriter:
    """
    Incremental writer for the sweep CSV and its ``.fits.jsonl`` sidecar.

    Rows are flushed one at a time, so an interrupted sweep keeps every
    completed row. The sidecar holds, per row, the key columns plus the truth
    and fitted parameters, from which every ``err_pi`` can be recomputed.
    """

    def __init__(self, path: str | Path, truth: SbmParams):
        self.path = Path(path)
        self.sidecar_path = self.path.with_name(self.path.name + ".fits.jsonl")
        self.truth = params_to_dict(truth)
        self._csv = self.path.open("w", encoding="utf-8", newline="")
        self._jsonl = self.sidecar_path.open("w", encoding="utf-8")
        self._writer = csv.writer(self._csv, lineterminator="\n")
        self._writer.writerow(SWEEP_COLUMNS)
        self._csv.flush()

    def write(self, row) -> None:
        self._writer.writerow(row.csv_fields())
        self._csv.flush()
        record = {"n": row.n, "seed": row.seed, "method": row.method, "truth": self.truth}
        record["fitted"] = row.to_dict()["fitted"]
        self._jsonl.write(dumps_line(record) + "\n")
        self._jsonl.flush()

    def close(self) -> None:
        self._csv.close()
        self._jsonl.close()


def read_sweep_csv(path: str | Path) -> list[dict[str, str]]:
    """The rows of a sweep CSV as raw string dicts."""
    try:
        with Path(path).open(encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
                raise FormatError(path, f"unexpected sweep header {reader.fieldnames}")
            return list(reader)
    except OSError as e:
        raise FormatError(path, f"cannot read file: {e.strerror or e}") from e

"""File formats: series CSV, graph JSON and coupling-model JSON.

Series CSV
    Header row of column names, one state per row. Optional ``t`` column
    (ignored), optional ``regime`` column (label of the transition leaving
    that row; the last row may be blank) and optional ``segment`` column
    (transitions between rows of different segments are not dynamics).

Graph JSON
    ``{"nodes": [names], "edges": [[target, source], ...]}`` with endpoints
    given as node names or 1-based indices.

Model JSON
    ``{"format": "ssrc-models", "version": 1, "models": [...]}``. Each model
    stores its order, node names, graph edges (by name), reduced monomials
    (0-based variable indices, constant as ``[]``), ``W_hat`` as sparse
    ``[row, col, value]`` triplets, weights, residual covariance, RMSE and
    regime id. Floats are written with ``repr`` precision, so they round-trip
    exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import CLAMP_TOL, SUM_TOL, RelationalGraph, TimeSeriesFrame
from .embedding import build_monomial_table
from .errors import ParseError, SchemaError, StructureError, ValidationError
from .ident import CouplingModel, build_dictionary

MODEL_FORMAT = "ssrc-models"
MODEL_VERSION = 1
RESERVED_COLUMNS = ("t", "regime", "segment")


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    atomic_write_text(path, dumps_json(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None


# -- series CSV ---------------------------------------------------------------

def read_series(path, normalize=False):
    """Load a series CSV into a :class:`TimeSeriesFrame`.

    Raises ``ParseError`` on malformed rows and ``ValidationError`` for
    negative entries or rows off the simplex (unless ``normalize`` rescales
    them to sum to one).
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", 1) from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise ParseError("duplicate column names", 1)
        state_cols = [i for i, h in enumerate(header) if h not in RESERVED_COLUMNS]
        if not state_cols:
            raise ParseError("no state columns", 1)
        regime_col = header.index("regime") if "regime" in header else None
        segment_col = header.index("segment") if "segment" in header else None

        rows, regimes, segments, lines = [], [], [], []
        for rec in reader:
            line = reader.line_num
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(rec)}", line)
            try:
                rows.append([float(rec[i]) for i in state_cols])
            except ValueError as exc:
                raise ParseError(f"non-numeric state value ({exc})", line) from None
            if not np.all(np.isfinite(rows[-1])):
                raise ParseError("non-finite state value", line)
            if regime_col is not None:
                regimes.append(rec[regime_col].strip())
            if segment_col is not None:
                try:
                    segments.append(int(rec[segment_col]))
                except ValueError:
                    raise ParseError("segment must be an integer", line) from None
            lines.append(line)

    if not rows:
        raise ParseError(f"{path}: no data rows", 2)
    X = np.array(rows)
    neg = np.nonzero(np.any(X < -CLAMP_TOL, axis=1))[0]
    if neg.size:
        raise ValidationError(f"negative entries on line(s) {[lines[i] for i in neg]}")
    X[X < 0] = 0.0
    sums = X.sum(axis=1)
    off = np.nonzero(np.abs(sums - 1.0) > SUM_TOL)[0]
    if off.size:
        if not normalize:
            raise ValidationError(
                f"rows not on the simplex (use --normalize) on line(s) {[lines[i] for i in off]}"
            )
        zero = np.nonzero(sums <= 0)[0]
        if zero.size:
            raise ValidationError(f"cannot normalize all-zero row(s) on line(s) {[lines[i] for i in zero]}")
        X = X / sums[:, None]

    labels = None
    if regime_col is not None:
        labels = regimes[:-1]
        blank = [lines[i] for i, r in enumerate(labels) if not r]
        if blank:
            raise ValidationError(f"missing regime label on line(s) {blank}")
    return TimeSeriesFrame(
        X,
        regime_labels=labels,
        column_names=tuple(header[i] for i in state_cols),
        segments=np.array(segments) if segment_col is not None else None,
    )


def series_to_csv(states, column_names, regimes=None, segments=None):
    """Render states (and optional per-transition regimes/segments) as CSV text."""
    states = np.asarray(states, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    header = ["t", *column_names]
    if regimes is not None:
        header.append("regime")
    if segments is not None:
        header.append("segment")
    writer.writerow(header)
    for t, row in enumerate(states):
        rec = [str(t), *(repr(float(v)) for v in row)]
        if regimes is not None:
            rec.append(regimes[t] if t < len(regimes) else "")
        if segments is not None:
            rec.append(str(int(segments[t])))
        writer.writerow(rec)
    return buf.getvalue()


def write_series(path, frame):
    atomic_write_text(
        path,
        series_to_csv(frame.states, frame.column_names, frame.regime_labels, frame.segments),
    )


def write_trajectory(path, trajectory, column_names):
    atomic_write_text(
        path,
        series_to_csv(trajectory.states, column_names, trajectory.applied_regimes,
                      trajectory.segments),
    )


# -- graph JSON ---------------------------------------------------------------

def graph_from_dict(doc):
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise SchemaError("graph document needs 'nodes' and 'edges'")
    nodes = doc["nodes"]
    if not isinstance(nodes, list) or not nodes:
        raise SchemaError("'nodes' must be a nonempty list of names")
    names = [str(s) for s in nodes]
    index = {name: i for i, name in enumerate(names)}

    def resolve(v):
        if isinstance(v, bool):
            raise SchemaError(f"bad node reference {v!r}")
        if isinstance(v, int):
            if not 1 <= v <= len(names):
                raise SchemaError(f"node index {v} out of range 1..{len(names)}")
            return v - 1
        if isinstance(v, str) and v in index:
            return index[v]
        raise SchemaError(f"unknown node {v!r}")

    edges = []
    for e in doc["edges"]:
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise SchemaError(f"edge {e!r} is not a [target, source] pair")
        edges.append((resolve(e[0]), resolve(e[1])))
    try:
        return RelationalGraph(len(names), edges, names)
    except ValidationError as exc:
        raise SchemaError(str(exc)) from None


def graph_to_dict(graph):
    return {
        "nodes": list(graph.names),
        "edges": [[graph.names[j], graph.names[k]] for j, k in graph.sorted_edges()],
    }


def read_graph(path):
    return graph_from_dict(read_json(path))


# -- model JSON ---------------------------------------------------------------

def model_to_dict(model):
    W = model.W_hat
    rows, cols = np.nonzero(W)
    return {
        "regime_id": model.regime_id,
        "order": model.order,
        "node_names": list(model.graph.names),
        "edges": graph_to_dict(model.graph)["edges"],
        "monomials": [list(m) for m in model.table.monomials] + [[]],
        "W_hat": {
            "shape": list(W.shape),
            "triplets": [[int(i), int(j), float(W[i, j])] for i, j in zip(rows, cols)],
        },
        "weights": [float(v) for v in model.weights],
        "residual_cov": model.residual_cov.tolist(),
        "fit_rmse": float(model.fit_rmse),
    }


def model_from_dict(doc):
    required = ("regime_id", "order", "node_names", "edges", "monomials", "W_hat",
                "residual_cov", "fit_rmse")
    if not isinstance(doc, dict):
        raise SchemaError("model entry must be an object")
    missing = [k for k in required if k not in doc]
    if missing:
        raise SchemaError(f"model entry lacks {missing}")
    try:
        graph = graph_from_dict({"nodes": doc["node_names"], "edges": doc["edges"]})
        order = doc["order"]
        if not isinstance(order, int) or order < 1:
            raise SchemaError("order must be a positive integer")
        table = build_monomial_table(graph.node_count, order)
        expected = [list(m) for m in table.monomials] + [[]]
        if doc["monomials"] != expected:
            raise SchemaError("monomial list does not match the canonical ordering")
        shape = tuple(doc["W_hat"]["shape"])
        if shape != (table.n, table.reduced_dim):
            raise SchemaError(f"W_hat shape {shape} does not match the embedding")
        W = np.zeros(shape)
        for i, j, v in doc["W_hat"]["triplets"]:
            W[int(i), int(j)] = float(v)
        dictionary = build_dictionary(graph, table)
        weights = doc.get("weights")
        weights = dictionary.weights_of(W) if weights is None else np.array(weights, dtype=float)
        return CouplingModel(
            order=order,
            table=table,
            weights=weights,
            W_hat=W,
            graph=graph,
            regime_id=str(doc["regime_id"]),
            residual_cov=np.array(doc["residual_cov"], dtype=float),
            fit_rmse=float(doc["fit_rmse"]),
            dictionary=dictionary,
        )
    except SchemaError:
        raise
    except (ValidationError, StructureError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise SchemaError(f"invalid model: {exc}") from None


def models_to_dict(models):
    if isinstance(models, CouplingModel):
        models = [models]
    elif isinstance(models, dict):
        models = list(models.values())
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "models": [model_to_dict(m) for m in models],
    }


def models_from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise SchemaError(f"not an {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_VERSION:
        raise SchemaError(f"unsupported version {doc.get('version')!r}")
    entries = doc.get("models")
    if not isinstance(entries, list) or not entries:
        raise SchemaError("'models' must be a nonempty list")
    models = {}
    for entry in entries:
        m = model_from_dict(entry)
        if m.regime_id in models:
            raise SchemaError(f"duplicate regime {m.regime_id!r}")
        models[m.regime_id] = m
    return models


def write_models(path, models):
    write_json(path, models_to_dict(models))


def read_models(path):
    return models_from_dict(read_json(path))

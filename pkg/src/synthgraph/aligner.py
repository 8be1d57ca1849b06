"""Assign generated feature rows to generated edges.

A boosted-tree ensemble per feature column learns to predict the column
from the structural features of an edge's endpoints. At alignment time
each synthetic edge gets a predicted feature vector, and rows are matched
to edges without replacement: either by rank-matching on the primary
continuous column (O(M log M), exact for monotone 1-D structure), by a
random permutation (baseline), or by exhaustive greedy argmax (small
graphs only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import BoostedTreesRegressor
from .errors import DataError, FitError
from .graph import ColumnSpec, FeatureTable, PartiteGraph
from .structural import structural_features

ALIGN_STREAM_TAG = 0xA1
EXHAUSTIVE_EDGE_LIMIT = 10_000
MIN_FIT_EDGES = 10


@dataclass(frozen=True, eq=False)
class ColumnEnsemble:
    """Predictors for one feature column.

    Continuous columns carry a single regressor; categorical columns one
    regressor per class, whose stacked outputs form a score vector.
    """

    kind: str
    models: tuple


@dataclass(frozen=True, eq=False)
class AlignerModel:
    schema: tuple[ColumnSpec, ...]
    feature_width: int
    ensembles: dict  # column name -> ColumnEnsemble


def edge_inputs(struct: np.ndarray, edges_global: np.ndarray) -> np.ndarray:
    """Per-edge input: structural features of src and dst concatenated."""
    if edges_global.shape[0] == 0:
        return np.zeros((0, 2 * struct.shape[1]))
    return np.hstack([struct[edges_global[:, 0]], struct[edges_global[:, 1]]])


def fit_aligner(inputs: np.ndarray, table: FeatureTable, seed: int = 0) -> AlignerModel:
    """Train one ensemble per feature column on real edges.

    Continuous targets use squared-error boosting directly; categorical
    targets train one 0/1 regressor per vocabulary entry. Training has no
    randomness, so results are reproducible regardless of `seed`.
    """
    if inputs.shape[0] != table.n_rows:
        raise DataError("one feature row per edge is required")
    if inputs.shape[0] < MIN_FIT_EDGES:
        raise FitError(f"need at least {MIN_FIT_EDGES} edges to fit the aligner")
    ensembles = {}
    for spec in table.schema:
        col = table.column(spec.name)
        if spec.kind == "continuous":
            models = (BoostedTreesRegressor().fit(inputs, col),)
        else:
            models = tuple(
                BoostedTreesRegressor().fit(inputs, (col == v).astype(np.float64))
                for v in range(len(spec.vocabulary))
            )
        ensembles[spec.name] = ColumnEnsemble(kind=spec.kind, models=models)
    return AlignerModel(
        schema=table.schema, feature_width=inputs.shape[1], ensembles=ensembles
    )


def predict_features(model: AlignerModel, inputs: np.ndarray) -> dict:
    """Predicted per-column values: (E,) continuous, (E, V) class scores."""
    if inputs.ndim != 2 or inputs.shape[1] != model.feature_width:
        raise DataError(
            f"expected inputs of width {model.feature_width}, got {inputs.shape}"
        )
    out = {}
    for spec in model.schema:
        ens = model.ensembles[spec.name]
        if spec.kind == "continuous":
            out[spec.name] = ens.models[0].predict(inputs)
        else:
            out[spec.name] = np.column_stack([m.predict(inputs) for m in ens.models])
    return out


def similarity(pred: dict, candidate: dict, schema: tuple) -> float:
    """Score one (predicted vector, candidate row) pair; higher is better.

    -sum of squared continuous errors plus, per categorical column, the
    cosine between the predicted score block and the one-hot candidate.
    """
    score = 0.0
    for spec in schema:
        p = np.asarray(pred[spec.name], dtype=np.float64)
        if spec.kind == "continuous":
            score -= float((p - candidate[spec.name]) ** 2)
        else:
            norm = float(np.linalg.norm(p))
            score += float(p[int(candidate[spec.name])]) / norm if norm > 0 else 0.0
    return score


def _ranking_keys_pred(predictions: dict, schema: tuple) -> list[np.ndarray]:
    cont = [s.name for s in schema if s.kind == "continuous"]
    if cont:
        return [predictions[c] for c in cont]
    first_cat = next(s.name for s in schema if s.kind == "categorical")
    return [np.argmax(predictions[first_cat], axis=1).astype(np.float64)]


def _ranking_keys_rows(table: FeatureTable) -> list[np.ndarray]:
    cont = [s.name for s in table.schema if s.kind == "continuous"]
    if cont:
        return [table.column(c) for c in cont]
    first_cat = next(s.name for s in table.schema if s.kind == "categorical")
    return [table.column(first_cat).astype(np.float64)]


def _lexsort(keys: list[np.ndarray]) -> np.ndarray:
    # primary key first in `keys`; np.lexsort treats the last key as primary
    return np.lexsort(tuple(reversed(keys)))


def rank_match(predictions: dict, table: FeatureTable, schema: tuple) -> np.ndarray:
    """Row index assigned to each edge by sorted rank-to-rank matching.

    Both sides are ordered by the first continuous column (ties broken by
    the remaining continuous columns, then stable index). When the table
    has more rows than edges, evenly spaced ranks of the sorted rows are
    used so the assigned subset spans the full distribution.
    """
    n_edges = len(next(iter(predictions.values())))
    edge_order = _lexsort(_ranking_keys_pred(predictions, schema))
    row_order = _lexsort(_ranking_keys_rows(table))
    n_rows = table.n_rows
    if n_rows > n_edges:
        sel = ((np.arange(n_edges) + 0.5) * n_rows / n_edges).astype(np.int64)
        row_order = row_order[sel]
    assignment = np.empty(n_edges, dtype=np.int64)
    assignment[edge_order] = row_order
    return assignment


def greedy_match(predictions: dict, table: FeatureTable, schema: tuple) -> np.ndarray:
    """Per-edge argmax similarity over not-yet-assigned rows (O(E*M))."""
    n_edges = len(next(iter(predictions.values())))
    if n_edges > EXHAUSTIVE_EDGE_LIMIT:
        raise DataError(
            f"exhaustive alignment is limited to {EXHAUSTIVE_EDGE_LIMIT} edges"
        )
    base = np.zeros(table.n_rows, dtype=np.float64)
    cont_parts, cat_parts = [], []
    for spec in schema:
        if spec.kind == "continuous":
            cont_parts.append(spec.name)
        else:
            cat_parts.append(spec.name)
    available = np.ones(table.n_rows, dtype=bool)
    assignment = np.empty(n_edges, dtype=np.int64)
    for e in range(n_edges):
        scores = base.copy()
        for name in cont_parts:
            scores -= (predictions[name][e] - table.column(name)) ** 2
        for name in cat_parts:
            block = predictions[name][e]
            norm = np.linalg.norm(block)
            if norm > 0:
                scores += block[table.column(name)] / norm
        scores[~available] = -np.inf
        pick = int(np.argmax(scores))
        assignment[e] = pick
        available[pick] = False
    return assignment


def _attach(graph: PartiteGraph, edge_type: int, assigned: FeatureTable,
            column_roles: dict | None) -> PartiteGraph:
    """Attach the assigned rows as edge features, splitting off node columns.

    Node-role columns land on the endpoint partite first-wins by edge
    order; nodes no edge touches receive leftover/assigned rows cyclically
    so the table stays full-height.
    """
    if not column_roles:
        feats = list(graph.edge_features)
        feats[edge_type] = assigned
        return graph.with_features(edge_features=tuple(feats))

    edge_cols = [s.name for s in assigned.schema if column_roles.get(s.name, "edge") == "edge"]
    feats = list(graph.edge_features)
    feats[edge_type] = assigned.select(edge_cols) if edge_cols else None
    node_features = dict(graph.node_features)
    src_name, dst_name = graph.edge_types[edge_type]
    arr = graph.edges[edge_type]
    for role, pname, ids in (("src", src_name, arr[:, 0]), ("dst", dst_name, arr[:, 1])):
        cols = [s.name for s in assigned.schema if column_roles.get(s.name) == role]
        if not cols:
            continue
        size = graph.partite_size(pname)
        first_edge = np.full(size, -1, dtype=np.int64)
        uniq, first_idx = np.unique(ids, return_index=True)
        first_edge[uniq] = first_idx
        untouched = np.flatnonzero(first_edge < 0)
        if untouched.size:
            # recycle rows deterministically for nodes without incident edges
            filler = np.arange(untouched.size) % arr.shape[0]
            first_edge[untouched] = filler
        node_features[pname] = assigned.select(cols).take(first_edge)
    return graph.with_features(node_features=node_features, edge_features=tuple(feats))


def align(graph: PartiteGraph, table: FeatureTable, model: AlignerModel | None,
          edge_type: int = 0, mode: str = "ranked", rng_seed: int = 0,
          column_roles: dict | None = None) -> PartiteGraph:
    """Pair feature rows with edges and return the attributed graph.

    Every edge receives exactly one row and no row is used twice; the
    edge list and the feature values themselves are never modified.
    """
    arr = graph.edges[edge_type]
    n_edges = arr.shape[0]
    if table.n_rows < n_edges:
        raise DataError(
            f"{table.n_rows} feature rows cannot cover {n_edges} edges"
        )
    if mode == "random":
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([rng_seed, ALIGN_STREAM_TAG, edge_type]))
        )
        assignment = rng.permutation(table.n_rows)[:n_edges]
    elif mode in ("ranked", "exhaustive"):
        if model is None:
            raise DataError(f"{mode} alignment requires a fitted aligner model")
        struct = structural_features(graph)
        goff = graph.partite_offset(graph.edge_types[edge_type][0])
        doff = graph.partite_offset(graph.edge_types[edge_type][1])
        eg = arr + np.array([goff, doff], dtype=np.int64)
        predictions = predict_features(model, edge_inputs(struct, eg))
        if mode == "ranked":
            assignment = rank_match(predictions, table, model.schema)
        else:
            assignment = greedy_match(predictions, table, model.schema)
    else:
        raise DataError(f"unknown alignment mode {mode!r}")
    return _attach(graph, edge_type, table.take(assignment), column_roles)

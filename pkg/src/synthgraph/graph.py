"""Attributed partite graph data model.

A graph is a set of named node partites, directed edge lists between
partites, and optional tabular feature tables attached to nodes or edges.
Graphs are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import DataError

KEY_SEP = "\x1f"  # joins multi-column node keys; never appears in CSV text


@dataclass(frozen=True)
class ColumnSpec:
    """Schema entry for one feature column.

    kind is "continuous" or "categorical"; categorical columns carry an
    ordered vocabulary of distinct string values (first-appearance order).
    """

    name: str
    kind: str
    vocabulary: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise DataError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.kind == "categorical" and not self.vocabulary:
            raise DataError(f"categorical column {self.name!r} needs a vocabulary")


@dataclass(frozen=True)
class FeatureTable:
    """Column-major feature storage.

    Continuous columns are float64 arrays; categorical columns are int64
    code arrays indexing into the column's vocabulary.
    """

    schema: tuple[ColumnSpec, ...]
    columns: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.schema) != len(self.columns):
            raise DataError("schema and column count differ")
        n = self.n_rows
        for spec, col in zip(self.schema, self.columns):
            if col.shape != (n,):
                raise DataError(f"column {spec.name!r} has wrong length")
            if spec.kind == "continuous":
                if not np.all(np.isfinite(col)):
                    raise DataError(f"non-finite value in continuous column {spec.name!r}")
            else:
                if col.size and (col.min() < 0 or col.max() >= len(spec.vocabulary)):
                    raise DataError(f"code out of vocabulary in column {spec.name!r}")

    @property
    def n_rows(self) -> int:
        return 0 if not self.columns else int(self.columns[0].shape[0])

    @property
    def column_names(self) -> list[str]:
        return [s.name for s in self.schema]

    def column(self, name: str) -> np.ndarray:
        for spec, col in zip(self.schema, self.columns):
            if spec.name == name:
                return col
        raise KeyError(name)

    def spec(self, name: str) -> ColumnSpec:
        for s in self.schema:
            if s.name == name:
                return s
        raise KeyError(name)

    def take(self, idx: np.ndarray) -> "FeatureTable":
        return FeatureTable(self.schema, tuple(c[idx] for c in self.columns))

    def select(self, names: list[str]) -> "FeatureTable":
        return FeatureTable(
            tuple(self.spec(n) for n in names),
            tuple(self.column(n) for n in names),
        )

    def to_frame(self) -> pd.DataFrame:
        """Decode into a pandas frame (categorical codes become strings)."""
        data = {}
        for spec, col in zip(self.schema, self.columns):
            if spec.kind == "continuous":
                data[spec.name] = col
            else:
                vocab = np.asarray(spec.vocabulary, dtype=object)
                data[spec.name] = vocab[col]
        return pd.DataFrame(data)

    @staticmethod
    def from_frame(frame: pd.DataFrame, kinds: dict[str, str],
                   vocabularies: dict[str, tuple[str, ...]] | None = None) -> "FeatureTable":
        """Encode a pandas frame given per-column kinds.

        A categorical column's vocabulary defaults to first-appearance order
        of its values; pass `vocabularies` to pin an existing encoding.
        """
        schema, columns = [], []
        for name in frame.columns:
            kind = kinds[name]
            raw = frame[name]
            if kind == "continuous":
                col = raw.to_numpy(dtype=np.float64)
                if not np.all(np.isfinite(col)):
                    raise DataError(f"missing or non-finite values in column {name!r}")
                schema.append(ColumnSpec(name, "continuous"))
                columns.append(col)
            else:
                values = raw.astype(str).to_numpy(dtype=object)
                if vocabularies and name in vocabularies:
                    vocab = vocabularies[name]
                    lookup = {v: i for i, v in enumerate(vocab)}
                    try:
                        codes = np.array([lookup[v] for v in values], dtype=np.int64)
                    except KeyError as exc:
                        raise DataError(f"value {exc.args[0]!r} not in vocabulary of {name!r}")
                else:
                    codes, uniques = pd.factorize(values)
                    if (codes < 0).any():
                        raise DataError(f"missing values in column {name!r}")
                    vocab = tuple(str(v) for v in uniques)
                    codes = codes.astype(np.int64)
                schema.append(ColumnSpec(name, "categorical", vocab))
                columns.append(codes)
        return FeatureTable(tuple(schema), tuple(columns))


def concat_tables(tables: list[FeatureTable]) -> FeatureTable:
    """Column-wise concatenation; row counts must agree."""
    schema = tuple(s for t in tables for s in t.schema)
    columns = tuple(c for t in tables for c in t.columns)
    return FeatureTable(schema, columns)


@dataclass(frozen=True)
class DegreeDistribution:
    """Node counts per degree, including zero-degree nodes."""

    direction: str  # "in" | "out"
    counts: dict[int, int]
    n_nodes: int

    @property
    def edge_count(self) -> int:
        return int(sum(k * c for k, c in self.counts.items()))

    @property
    def max_degree(self) -> int:
        return max(self.counts) if self.counts else 0

    def as_vector(self, k_max: int | None = None) -> np.ndarray:
        """Dense count vector c_0..c_kmax."""
        k_max = self.max_degree if k_max is None else k_max
        vec = np.zeros(k_max + 1, dtype=np.float64)
        for k, c in self.counts.items():
            if k <= k_max:
                vec[k] = c
        return vec


@dataclass(frozen=True)
class PartiteGraph:
    """Directed graph over named node partites with optional features.

    edges[i] is an (E_i, 2) int64 array of (src_id, dst_id) pairs for
    edge_types[i]; ids are dense 0-based indices within each partite.
    Duplicate (src, dst) pairs within an edge type are disallowed.
    """

    partites: tuple[tuple[str, int], ...]
    edge_types: tuple[tuple[str, str], ...]
    edges: tuple[np.ndarray, ...]
    node_features: dict[str, FeatureTable] = field(default_factory=dict)
    edge_features: tuple[FeatureTable | None, ...] = ()

    def __post_init__(self):
        if not self.edge_features:
            object.__setattr__(self, "edge_features", (None,) * len(self.edge_types))
        sizes = dict(self.partites)
        if len(sizes) != len(self.partites):
            raise DataError("duplicate partite names")
        if len(self.edges) != len(self.edge_types) or len(self.edge_features) != len(self.edge_types):
            raise DataError("edge list / edge type count mismatch")
        for (src, dst), arr, feats in zip(self.edge_types, self.edges, self.edge_features):
            if src not in sizes or dst not in sizes:
                raise DataError(f"edge type ({src!r}, {dst!r}) references unknown partite")
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise DataError("edge arrays must have shape (E, 2)")
            if arr.size:
                if arr[:, 0].min() < 0 or arr[:, 0].max() >= sizes[src]:
                    raise DataError(f"src id out of range for partite {src!r}")
                if arr[:, 1].min() < 0 or arr[:, 1].max() >= sizes[dst]:
                    raise DataError(f"dst id out of range for partite {dst!r}")
            keys = arr[:, 0].astype(np.int64) * np.int64(max(sizes[dst], 1)) + arr[:, 1]
            if np.unique(keys).size != arr.shape[0]:
                raise DataError(f"duplicate (src, dst) pair in edge type ({src!r}, {dst!r})")
            if feats is not None and feats.n_rows != arr.shape[0]:
                raise DataError("edge feature row count != edge count")
        for name, table in self.node_features.items():
            if table.n_rows != sizes[name]:
                raise DataError(f"node feature row count != size of partite {name!r}")

    @property
    def n_nodes_total(self) -> int:
        return int(sum(n for _, n in self.partites))

    @property
    def n_edges_total(self) -> int:
        return int(sum(e.shape[0] for e in self.edges))

    def partite_size(self, name: str) -> int:
        return dict(self.partites)[name]

    def partite_offset(self, name: str) -> int:
        """Start of this partite in the global 0..N_total node indexing."""
        off = 0
        for pname, n in self.partites:
            if pname == name:
                return off
            off += n
        raise KeyError(name)

    def global_edge_array(self) -> np.ndarray:
        """All edges as (E_total, 2) pairs of global node indices."""
        parts = []
        for (src, dst), arr in zip(self.edge_types, self.edges):
            if arr.size == 0:
                continue
            shifted = arr.copy()
            shifted[:, 0] += self.partite_offset(src)
            shifted[:, 1] += self.partite_offset(dst)
            parts.append(shifted)
        if not parts:
            return np.zeros((0, 2), dtype=np.int64)
        return np.concatenate(parts, axis=0)

    def with_features(self, node_features: dict[str, FeatureTable] | None = None,
                      edge_features: tuple[FeatureTable | None, ...] | None = None) -> "PartiteGraph":
        return replace(
            self,
            node_features=self.node_features if node_features is None else node_features,
            edge_features=self.edge_features if edge_features is None else edge_features,
        )


@dataclass(frozen=True)
class PartiteRule:
    """One partite's node-key definition: concatenated column values."""

    name: str
    key_columns: tuple[str, ...]


@dataclass(frozen=True)
class ConstructionRules:
    """How to turn a flat table into a partite graph.

    Each row co-occurrence produces one edge per declared edge type
    (src partite key -> dst partite key, same row). Columns not used in
    any node key become edge features.
    """

    partites: tuple[PartiteRule, ...]
    edge_types: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if len(self.partites) < 2 and not self.edge_types:
            raise DataError("need at least two partites to form edges")
        if not self.edge_types:
            object.__setattr__(
                self, "edge_types", ((self.partites[0].name, self.partites[1].name),)
            )
        names = {p.name for p in self.partites}
        for src, dst in self.edge_types:
            if src not in names or dst not in names:
                raise DataError(f"edge type ({src!r}, {dst!r}) references unknown partite")


def build_graph_from_table(frame: pd.DataFrame, rules: ConstructionRules,
                           column_kinds: dict[str, str] | None = None) -> PartiteGraph:
    """Construct a partite graph from a flat table.

    One node per distinct concatenated key per partite (ids assigned in
    first-appearance order), one edge per row; duplicate (src, dst) rows
    collapse to a single edge keeping the first row's features.
    """
    if frame.shape[0] == 0:
        raise DataError("input table is empty")
    for rule in rules.partites:
        for col in rule.key_columns:
            if col not in frame.columns:
                raise DataError(f"construction rule references missing column {col!r}")

    node_ids: dict[str, np.ndarray] = {}
    partites = []
    for rule in rules.partites:
        parts = [frame[c].astype(str) for c in rule.key_columns]
        keys = parts[0]
        for extra in parts[1:]:
            keys = keys + KEY_SEP + extra
        codes, uniques = pd.factorize(keys.to_numpy(dtype=object))
        node_ids[rule.name] = codes.astype(np.int64)
        partites.append((rule.name, int(len(uniques))))

    key_cols = {c for rule in rules.partites for c in rule.key_columns}
    feature_cols = [c for c in frame.columns if c not in key_cols]
    kinds = dict(column_kinds or {})
    for c in feature_cols:
        kinds.setdefault(c, "continuous" if pd.api.types.is_numeric_dtype(frame[c]) else "categorical")

    edges, edge_feats = [], []
    for src_name, dst_name in rules.edge_types:
        src = node_ids[src_name]
        dst = node_ids[dst_name]
        pair_keys = src * np.int64(max(dst.max() + 1, 1)) + dst
        _, first_idx = np.unique(pair_keys, return_index=True)
        keep = np.sort(first_idx)  # first-appearance edge order
        edges.append(np.column_stack([src[keep], dst[keep]]))
        if feature_cols:
            table = FeatureTable.from_frame(frame.iloc[keep][feature_cols], kinds)
        else:
            table = None
        edge_feats.append(table)

    return PartiteGraph(
        partites=tuple(partites),
        edge_types=tuple(rules.edge_types),
        edges=tuple(edges),
        edge_features=tuple(edge_feats),
    )


def export_edge_table(graph: PartiteGraph, edge_type: int = 0) -> pd.DataFrame:
    """Re-export an edge list (plus features) as a flat table.

    Rebuilding the graph from this table reproduces the same structure,
    since ids were assigned in first-appearance order.
    """
    src_name, dst_name = graph.edge_types[edge_type]
    arr = graph.edges[edge_type]
    frame = pd.DataFrame({src_name: arr[:, 0].astype(str), dst_name: arr[:, 1].astype(str)})
    feats = graph.edge_features[edge_type]
    if feats is not None:
        frame = pd.concat([frame, feats.to_frame()], axis=1)
    return frame


def degree_distribution(graph: PartiteGraph, edge_type: int, direction: str) -> DegreeDistribution:
    """Degree counts over the relevant partite; zero-degree nodes included."""
    if edge_type < 0 or edge_type >= len(graph.edge_types):
        raise DataError(f"no such edge type index {edge_type}")
    if direction not in ("in", "out"):
        raise DataError(f"direction must be 'in' or 'out', got {direction!r}")
    src_name, dst_name = graph.edge_types[edge_type]
    arr = graph.edges[edge_type]
    if direction == "out":
        ids, n = arr[:, 0], graph.partite_size(src_name)
    else:
        ids, n = arr[:, 1], graph.partite_size(dst_name)
    per_node = np.bincount(ids, minlength=n)
    degrees, counts = np.unique(per_node, return_counts=True)
    return DegreeDistribution(
        direction=direction,
        counts={int(k): int(c) for k, c in zip(degrees, counts)},
        n_nodes=n,
    )

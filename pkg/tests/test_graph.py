"""Graph construction, dedup, degree distributions, and table round trips."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthgraph.errors import DataError
from synthgraph.graph import (
    ColumnSpec,
    ConstructionRules,
    FeatureTable,
    PartiteGraph,
    PartiteRule,
    build_graph_from_table,
    degree_distribution,
    export_edge_table,
)

RULES = ConstructionRules(
    partites=(PartiteRule("user", ("user",)), PartiteRule("merchant", ("merchant",))),
)


def test_three_row_example(toy_frame):
    g = build_graph_from_table(toy_frame, RULES)
    assert g.partite_size("user") == 2
    assert g.partite_size("merchant") == 2
    assert g.edges[0].shape == (3, 2)
    # first-appearance ids: u1->0, u2->1; m1->0, m2->1
    assert g.edges[0].tolist() == [[0, 0], [0, 1], [1, 0]]


def test_duplicate_rows_first_wins():
    frame = pd.DataFrame({
        "user": ["u1", "u1", "u2"],
        "merchant": ["m1", "m1", "m1"],
        "amount": [10.0, 99.0, 5.0],
    })
    g = build_graph_from_table(frame, RULES)
    assert g.edges[0].shape[0] == 2
    feats = g.edge_features[0]
    # the duplicate (u1, m1) keeps the first row's amount
    assert feats.column("amount").tolist() == [10.0, 5.0]


def test_missing_column_names_it():
    frame = pd.DataFrame({"user": ["u1"], "amount": [1.0]})
    with pytest.raises(DataError, match="merchant"):
        build_graph_from_table(frame, RULES)


def test_empty_table_rejected():
    frame = pd.DataFrame({"user": [], "merchant": []})
    with pytest.raises(DataError):
        build_graph_from_table(frame, RULES)


def test_star_out_degrees():
    # K_{1,3} hub->leaf within a single 4-node partite
    edges = np.array([[0, 1], [0, 2], [0, 3]], dtype=np.int64)
    g = PartiteGraph(
        partites=(("v", 4),),
        edge_types=(("v", "v"),),
        edges=(edges,),
    )
    out = degree_distribution(g, 0, "out")
    assert out.counts == {3: 1, 0: 3}
    inn = degree_distribution(g, 0, "in")
    assert inn.counts == {1: 3, 0: 1}


def test_empty_edge_list_degrees():
    g = PartiteGraph(
        partites=(("v", 5),),
        edge_types=(("v", "v"),),
        edges=(np.zeros((0, 2), dtype=np.int64),),
    )
    dd = degree_distribution(g, 0, "out")
    assert dd.counts == {0: 5}
    assert dd.edge_count == 0


def test_degree_distribution_totals(toy_frame):
    g = build_graph_from_table(toy_frame, RULES)
    out = degree_distribution(g, 0, "out")
    inn = degree_distribution(g, 0, "in")
    assert sum(out.counts.values()) == g.partite_size("user")
    assert sum(inn.counts.values()) == g.partite_size("merchant")
    assert out.edge_count == inn.edge_count == 3


def test_reexport_idempotent(toy_frame):
    g1 = build_graph_from_table(toy_frame, RULES)
    frame2 = export_edge_table(g1)
    g2 = build_graph_from_table(frame2, RULES)
    assert g1.partites == g2.partites
    np.testing.assert_array_equal(g1.edges[0], g2.edges[0])
    f1, f2 = g1.edge_features[0], g2.edge_features[0]
    assert f1.column_names == f2.column_names
    for name in f1.column_names:
        np.testing.assert_array_equal(f1.column(name), f2.column(name))


def test_duplicate_edge_pairs_rejected_in_graph():
    edges = np.array([[0, 1], [0, 1]], dtype=np.int64)
    with pytest.raises(DataError):
        PartiteGraph(partites=(("v", 2),), edge_types=(("v", "v"),), edges=(edges,))


def test_out_of_range_edge_rejected():
    edges = np.array([[0, 5]], dtype=np.int64)
    with pytest.raises(DataError):
        PartiteGraph(
            partites=(("a", 2), ("b", 3)),
            edge_types=(("a", "b"),),
            edges=(edges,),
        )


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=200))
def test_handshake_invariant(pairs):
    frame = pd.DataFrame({
        "user": [f"u{a}" for a, _ in pairs],
        "merchant": [f"m{b}" for _, b in pairs],
    })
    g = build_graph_from_table(frame, RULES)
    out = degree_distribution(g, 0, "out")
    inn = degree_distribution(g, 0, "in")
    e = g.edges[0].shape[0]
    assert sum(k * c for k, c in out.counts.items()) == e
    assert sum(k * c for k, c in inn.counts.items()) == e
    assert sum(out.counts.values()) == g.partite_size("user")
    assert sum(inn.counts.values()) == g.partite_size("merchant")


def test_feature_table_roundtrip():
    schema = (
        ColumnSpec("amount", "continuous"),
        ColumnSpec("cat", "categorical", ("x", "y", "z")),
    )
    table = FeatureTable(schema, (np.array([1.0, 2.0]), np.array([2, 0], dtype=np.int64)))
    frame = table.to_frame()
    assert frame["cat"].tolist() == ["z", "x"]
    back = FeatureTable.from_frame(frame, {"amount": "continuous", "cat": "categorical"},
                                   vocabularies={"cat": ("x", "y", "z")})
    np.testing.assert_array_equal(back.column("cat"), table.column("cat"))
    np.testing.assert_array_equal(back.column("amount"), table.column("amount"))


def test_feature_table_take_and_select():
    schema = (ColumnSpec("a", "continuous"), ColumnSpec("b", "continuous"))
    t = FeatureTable(schema, (np.arange(4.0), np.arange(4.0) * 10))
    sub = t.take(np.array([2, 0]))
    assert sub.column("a").tolist() == [2.0, 0.0]
    only_b = t.select(("b",))
    assert only_b.column_names == ["b"]


def test_categorical_needs_vocabulary():
    with pytest.raises(Exception):
        ColumnSpec("c", "categorical")


def test_categorical_code_out_of_vocab_rejected():
    schema = (ColumnSpec("c", "categorical", ("a",)),)
    with pytest.raises(DataError):
        FeatureTable(schema, (np.array([1], dtype=np.int64),))


def test_nonfinite_continuous_rejected():
    schema = (ColumnSpec("a", "continuous"),)
    with pytest.raises(DataError):
        FeatureTable(schema, (np.array([np.nan]),))

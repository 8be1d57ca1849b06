"""Structural features checked against networkx and exact BFS oracles."""

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthgraph.graph import PartiteGraph
from synthgraph.structural import (
    clustering_coefficient,
    effective_diameter,
    hop_plot,
    pagerank,
    structural_features,
    undirected_simple,
)


def random_edges(rng, n, e):
    src = rng.integers(0, n, size=e)
    dst = rng.integers(0, n, size=e)
    pairs = np.unique(np.column_stack([src, dst]), axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return pairs


def test_pagerank_matches_networkx(rng):
    n = 60
    edges = random_edges(rng, n, 300)
    ours = pagerank(edges, n)
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from(map(tuple, edges))
    ref = nx.pagerank(g, alpha=0.85, tol=1e-10, max_iter=500)
    ref_vec = np.array([ref[i] for i in range(n)])
    np.testing.assert_allclose(ours, ref_vec, atol=1e-6)


def test_pagerank_directed_cycle_uniform():
    n = 7
    edges = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    pr = pagerank(edges, n)
    np.testing.assert_allclose(pr, np.full(n, 1.0 / n), atol=1e-9)


def test_pagerank_sums_to_one(rng):
    for n, e in [(5, 4), (40, 100), (80, 10)]:
        edges = random_edges(rng, n, e)
        pr = pagerank(edges, n)
        assert pr.min() >= 0
        assert abs(pr.sum() - 1.0) < 1e-9


def test_clustering_matches_networkx(rng):
    n = 50
    edges = random_edges(rng, n, 250)
    ours = clustering_coefficient(edges, n)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(map(tuple, edges))
    ref = nx.clustering(g)
    ref_vec = np.array([ref[i] for i in range(n)])
    np.testing.assert_allclose(ours, ref_vec, atol=1e-12)


def test_triangle_clustering_is_one():
    edges = np.array([[0, 1], [1, 2], [2, 0]])
    np.testing.assert_array_equal(clustering_coefficient(edges, 3), np.ones(3))


def test_star_clustering_is_zero():
    edges = np.array([[0, 1], [0, 2], [0, 3], [0, 4]])
    np.testing.assert_array_equal(clustering_coefficient(edges, 5), np.zeros(5))


def test_structural_feature_matrix():
    edges = np.array([[0, 1], [0, 2], [0, 3]], dtype=np.int64)
    g = PartiteGraph(partites=(("v", 4),), edge_types=(("v", "v"),), edges=(edges,))
    feats = structural_features(g)
    assert feats.shape == (4, 4)
    assert feats[:, 0].tolist() == [3.0, 1.0, 1.0, 1.0]  # undirected degree
    np.testing.assert_allclose(feats[:, 3], feats[:, 0] / 3.0)  # centrality
    assert abs(feats[:, 1].sum() - 1.0) < 1e-9


def test_hop_plot_path_example():
    edges = np.array([[0, 1], [1, 2]])
    hp = hop_plot(edges, 3, max_hops=3, num_sources=3)
    assert hp[0] == 0
    assert hp[1] == 4
    assert hp[2] == 6
    assert hp[3] == 6


def test_hop_plot_k4_effective_diameter():
    edges = np.array([(i, j) for i in range(4) for j in range(i + 1, 4)])
    hp = hop_plot(edges, 4, max_hops=4, num_sources=4)
    assert effective_diameter(hp) == 1


def test_hop_plot_star_1000_effective_diameter():
    leaves = np.arange(1, 1000)
    edges = np.column_stack([np.zeros_like(leaves), leaves])
    hp = hop_plot(edges, 1000, max_hops=4, num_sources=10**6)
    assert effective_diameter(hp) == 2


def test_hop_plot_exact_matches_bfs_oracle(rng):
    n = 120
    edges = random_edges(rng, n, 300)
    hp = hop_plot(edges, n, max_hops=8, num_sources=n)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(map(tuple, edges))
    lengths = dict(nx.all_pairs_shortest_path_length(g))
    for h in range(9):
        pairs = sum(
            1
            for u, reach in lengths.items()
            for v, d in reach.items()
            if u != v and d <= h
        )
        assert hp[h] == pairs


def test_hop_plot_monotone(rng):
    edges = random_edges(rng, 200, 400)
    hp = hop_plot(edges, 200, max_hops=10, num_sources=64, seed=3)
    assert np.all(np.diff(hp) >= 0)


def test_hop_plot_disconnected_components():
    # two disjoint edges: pairs never cross components
    edges = np.array([[0, 1], [2, 3]])
    hp = hop_plot(edges, 4, max_hops=3, num_sources=4)
    assert hp[-1] == 4


def test_undirected_simple_removes_loops_and_dups():
    edges = np.array([[0, 0], [0, 1], [1, 0]])
    und = undirected_simple(edges, 2)
    assert und.diagonal().sum() == 0
    assert und.nnz == 2
    assert und.max() == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 80), st.integers(0, 2**31 - 1))
def test_pagerank_valid_distribution(n, e, seed):
    rng = np.random.default_rng(seed)
    edges = random_edges(rng, n, e)
    pr = pagerank(edges, n)
    assert pr.shape == (n,)
    assert np.all(pr >= 0)
    assert abs(pr.sum() - 1.0) < 1e-9

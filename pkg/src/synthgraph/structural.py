"""Structural node features and hop-plot estimation on sparse graphs.

All routines run on the global node indexing of a PartiteGraph (every
partite concatenated), treating the edge list as a directed graph and
projecting to an undirected simple graph where the quantity demands it.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import PartiteGraph

PAGERANK_DAMPING = 0.85
PAGERANK_TOL = 1e-8
PAGERANK_MAX_ITER = 200

STRUCT_FEATURE_NAMES = ("degree", "pagerank", "clustering", "degree_centrality")


def adjacency(edges: np.ndarray, n: int) -> sp.csr_matrix:
    """Directed adjacency with duplicate edges collapsed to weight 1."""
    if edges.size == 0:
        return sp.csr_matrix((n, n), dtype=np.float64)
    data = np.ones(edges.shape[0], dtype=np.float64)
    mat = sp.csr_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n, n))
    mat.data[:] = 1.0
    return mat


def undirected_simple(edges: np.ndarray, n: int) -> sp.csr_matrix:
    """Symmetrized adjacency with self-loops removed and weights binarized."""
    mat = adjacency(edges, n)
    mat = mat + mat.T
    mat.setdiag(0)
    mat.eliminate_zeros()
    mat.data[:] = 1.0
    return mat.tocsr()


def pagerank(edges: np.ndarray, n: int, damping: float = PAGERANK_DAMPING,
             tol: float = PAGERANK_TOL, max_iter: int = PAGERANK_MAX_ITER) -> np.ndarray:
    """Power-iteration pagerank on the directed graph.

    Dangling nodes redistribute their mass uniformly; convergence is the
    L1 change between successive iterates falling below `tol`.
    """
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    mat = adjacency(edges, n)
    out_deg = np.asarray(mat.sum(axis=1)).ravel()
    dangling = out_deg == 0
    inv_out = np.where(dangling, 0.0, 1.0 / np.maximum(out_deg, 1e-300))
    # row-normalized transition matrix, transposed for x <- P^T x updates
    trans = mat.multiply(inv_out[:, None]).T.tocsr()

    x = np.full(n, 1.0 / n)
    base = (1.0 - damping) / n
    for _ in range(max_iter):
        dangling_mass = x[dangling].sum() / n
        x_new = damping * (trans @ x + dangling_mass) + base
        if np.abs(x_new - x).sum() < tol:
            return x_new
        x = x_new
    return x


def clustering_coefficient(edges: np.ndarray, n: int) -> np.ndarray:
    """Local clustering coefficient on the undirected simple projection.

    triangles_i = (A @ A) * A summed over row i, halved; coefficient is
    triangles / (d * (d - 1) / 2), zero when degree < 2.
    """
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    und = undirected_simple(edges, n)
    deg = np.asarray(und.sum(axis=1)).ravel()
    tri2 = np.asarray((und @ und).multiply(und).sum(axis=1)).ravel()  # 2 * triangles
    possible = deg * (deg - 1.0)
    out = np.zeros(n, dtype=np.float64)
    mask = possible > 0
    out[mask] = tri2[mask] / possible[mask]
    return out


def structural_features(graph: PartiteGraph) -> np.ndarray:
    """Per-node matrix of (degree, pagerank, clustering, degree centrality).

    Rows follow the global node indexing; degree is the undirected simple
    degree and centrality is degree / (N_total - 1).
    """
    n = graph.n_nodes_total
    edges = graph.global_edge_array()
    und = undirected_simple(edges, n)
    deg = np.asarray(und.sum(axis=1)).ravel()
    pr = pagerank(edges, n)
    cc = clustering_coefficient(edges, n)
    centrality = deg / (n - 1.0) if n > 1 else np.zeros(n)
    return np.column_stack([deg, pr, cc, centrality])


def hop_plot(edges: np.ndarray, n: int, max_hops: int = 10,
             num_sources: int = 256, seed: int = 0) -> np.ndarray:
    """Estimated count of ordered node pairs within h hops, h = 0..max_hops.

    Frontier BFS on the undirected simple projection from a random sample
    of source nodes; reachable counts are scaled by n / num_sources. With
    num_sources >= n every node is a source and the counts are exact.
    """
    if n == 0:
        return np.zeros(max_hops + 1, dtype=np.float64)
    und = undirected_simple(edges, n)
    indptr, indices = und.indptr, und.indices

    rng = np.random.default_rng(seed)
    if num_sources >= n:
        sources = np.arange(n)
        scale = 1.0
    else:
        sources = rng.choice(n, size=num_sources, replace=False)
        scale = n / num_sources

    counts = np.zeros(max_hops + 1, dtype=np.float64)
    visited = np.zeros(n, dtype=bool)
    for s in sources:
        visited[:] = False
        visited[s] = True
        frontier = np.array([s], dtype=np.int64)
        # ordered pairs exclude the source itself, so d(0) = 0
        reached = 0
        for h in range(1, max_hops + 1):
            if frontier.size:
                nbrs = np.concatenate(
                    [indices[indptr[u]:indptr[u + 1]] for u in frontier]
                ) if frontier.size else np.zeros(0, dtype=np.int64)
                nbrs = np.unique(nbrs)
                nbrs = nbrs[~visited[nbrs]]
                visited[nbrs] = True
                reached += nbrs.size
                frontier = nbrs
            counts[h] += reached
    return counts * scale


def effective_diameter(hop_counts: np.ndarray, quantile: float = 0.9) -> int:
    """Smallest hop h whose pair count reaches `quantile` of the final one."""
    total = hop_counts[-1]
    if total <= 0:
        return 0
    target = quantile * total
    for h, c in enumerate(hop_counts):
        if c >= target:
            return h
    return len(hop_counts) - 1

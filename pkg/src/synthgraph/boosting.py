"""Histogram gradient-boosted regression trees with L1 leaf shrinkage.

Squared-error boosting in the second-order style: per boosting round the
gradient is (prediction - target) with unit hessian, leaf values are
-T_alpha(G) / (H + lambda) where T_alpha is the L1 soft-threshold, and
split gain uses the same shrunk scores. Features are pre-binned into at
most 255 quantile cuts, so fitting is deterministic with no RNG at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitError

DEFAULT_TREES = 100
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_MAX_DEPTH = 5
DEFAULT_L1 = 10.0
DEFAULT_L2 = 1.0
MAX_BINS = 256


def soft_threshold(g: float | np.ndarray, alpha: float):
    """L1 shrinkage: sign(g) * max(0, |g| - alpha)."""
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


@dataclass(eq=False)
class Tree:
    """Flat-array decision tree over binned features.

    feature[i] < 0 marks a leaf; otherwise rows with
    bin[feature[i]] <= threshold[i] descend to left[i], the rest to
    right[i]. value[i] is meaningful only at leaves.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict_binned(self, binned: np.ndarray) -> np.ndarray:
        node = np.zeros(binned.shape[0], dtype=np.int64)
        out = np.zeros(binned.shape[0], dtype=np.float64)
        active = np.arange(binned.shape[0])
        while active.size:
            feats = self.feature[node[active]]
            at_leaf = feats < 0
            leaf_rows = active[at_leaf]
            out[leaf_rows] = self.value[node[leaf_rows]]
            active = active[~at_leaf]
            if active.size == 0:
                break
            cur = node[active]
            go_left = binned[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return out


@dataclass(eq=False)
class BoostedTreesRegressor:
    """Deterministic gradient-boosted trees for one regression target."""

    n_trees: int = DEFAULT_TREES
    learning_rate: float = DEFAULT_LEARNING_RATE
    max_depth: int = DEFAULT_MAX_DEPTH
    l1_penalty: float = DEFAULT_L1
    l2_penalty: float = DEFAULT_L2
    max_bins: int = MAX_BINS
    min_child_weight: float = 1.0
    bin_edges_: list = field(default_factory=list, init=False)
    base_score_: float = field(default=0.0, init=False)
    trees_: list = field(default_factory=list, init=False)

    def _fit_bins(self, x: np.ndarray) -> None:
        self.bin_edges_ = []
        qs = np.linspace(0.0, 1.0, self.max_bins + 1)[1:-1]
        for j in range(x.shape[1]):
            self.bin_edges_.append(np.unique(np.quantile(x[:, j], qs)))

    def _bin(self, x: np.ndarray) -> np.ndarray:
        binned = np.empty(x.shape, dtype=np.int32)
        for j, edges in enumerate(self.bin_edges_):
            binned[:, j] = np.searchsorted(edges, x[:, j], side="right")
        return binned

    def _leaf_value(self, g_sum: float, h_sum: float) -> float:
        return float(-soft_threshold(g_sum, self.l1_penalty) / (h_sum + self.l2_penalty))

    def _split_score(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        return soft_threshold(g, self.l1_penalty) ** 2 / (h + self.l2_penalty)

    def _build_tree(self, binned: np.ndarray, grad: np.ndarray) -> tuple[Tree, np.ndarray]:
        n = binned.shape[0]
        feature, threshold, left, right, value = [], [], [], [], []
        residual_update = np.zeros(n, dtype=np.float64)

        def new_node() -> int:
            feature.append(-1)
            threshold.append(-1)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, rows, depth = stack.pop()
            g_sum = float(grad[rows].sum())
            h_sum = float(rows.size)
            split = None
            if depth < self.max_depth and rows.size >= 2 * self.min_child_weight:
                split = self._find_split(binned, grad, rows, g_sum, h_sum)
            if split is None:
                value[node] = self._leaf_value(g_sum, h_sum)
                residual_update[rows] = value[node]
                continue
            f, t = split
            feature[node] = f
            threshold[node] = t
            go_left = binned[rows, f] <= t
            left[node] = new_node()
            right[node] = new_node()
            stack.append((left[node], rows[go_left], depth + 1))
            stack.append((right[node], rows[~go_left], depth + 1))

        tree = Tree(
            feature=np.array(feature, dtype=np.int32),
            threshold=np.array(threshold, dtype=np.int32),
            left=np.array(left, dtype=np.int32),
            right=np.array(right, dtype=np.int32),
            value=np.array(value, dtype=np.float64),
        )
        return tree, residual_update

    def _find_split(self, binned, grad, rows, g_sum, h_sum):
        n_feat = binned.shape[1]
        best_gain = 0.0
        best = None
        parent = self._split_score(np.array(g_sum), np.array(h_sum))
        for f in range(n_feat):
            n_bins = len(self.bin_edges_[f]) + 1
            if n_bins < 2:
                continue
            b = binned[rows, f]
            hist_g = np.bincount(b, weights=grad[rows], minlength=n_bins)
            hist_c = np.bincount(b, minlength=n_bins).astype(np.float64)
            gl = np.cumsum(hist_g)[:-1]
            hl = np.cumsum(hist_c)[:-1]
            gr = g_sum - gl
            hr = h_sum - hl
            valid = (hl >= self.min_child_weight) & (hr >= self.min_child_weight)
            if not valid.any():
                continue
            gains = 0.5 * (self._split_score(gl, hl) + self._split_score(gr, hr) - parent)
            gains[~valid] = -np.inf
            t = int(np.argmax(gains))
            if gains[t] > best_gain + 1e-12:
                best_gain = float(gains[t])
                best = (f, t)
        return best

    def fit(self, x: np.ndarray, y: np.ndarray) -> "BoostedTreesRegressor":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise FitError("expected x of shape (n, f) and matching y")
        if x.shape[0] < 2:
            raise FitError("need at least 2 rows to fit")
        self._fit_bins(x)
        binned = self._bin(x)
        self.base_score_ = float(np.mean(y))
        self.trees_ = []
        pred = np.full(x.shape[0], self.base_score_)
        for _ in range(self.n_trees):
            grad = pred - y
            tree, update = self._build_tree(binned, grad)
            self.trees_.append(tree)
            pred += self.learning_rate * update
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if not self.bin_edges_:
            raise FitError("model is not fitted")
        if x.ndim != 2 or x.shape[1] != len(self.bin_edges_):
            raise FitError(
                f"expected {len(self.bin_edges_)} input features, got {x.shape}"
            )
        binned = self._bin(x)
        out = np.full(x.shape[0], self.base_score_)
        for tree in self.trees_:
            out += self.learning_rate * tree.predict_binned(binned)
        return out

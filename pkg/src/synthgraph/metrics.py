"""Fidelity metrics between a real and a synthetic attributed graph.

Structure is compared through degree-distribution curve error and
hop-plots, features through an association matrix (Pearson, correlation
ratio, Theil's U), and their interaction through the JS divergence of
joint (degree bucket, feature bin) histograms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .graph import DegreeDistribution, FeatureTable, PartiteGraph, degree_distribution
from .structural import effective_diameter, hop_plot

logger = logging.getLogger(__name__)

DCC_POINTS = 100
DEGREE_BUCKET_CAP = 2 ** 20  # degrees above this share the last log2 bucket
N_DEGREE_BUCKETS = 22  # 0, 1, 2-3, ..., [2^20, inf)
N_FEATURE_BINS = 16
TOP_CATEGORIES = N_FEATURE_BINS - 1


def _curve(dd: DegreeDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Positive-degree support (k, c_k) sorted by degree."""
    ks = np.array(sorted(k for k, c in dd.counts.items() if k >= 1 and c > 0), dtype=np.float64)
    cs = np.array([dd.counts[int(k)] for k in ks], dtype=np.float64)
    return ks, cs


def _dcc_interpolated(real: DegreeDistribution, synth: DegreeDistribution,
                      normalized: bool) -> float:
    """Mean relative curve error at 100 log-spaced degree points.

    Both curves are linearly interpolated in log-degree over the real
    curve's positive-degree support; when `normalized`, each curve is
    first scaled by its own maximum degree and maximum count so graphs
    of different sizes remain comparable.
    """
    rk, rc = _curve(real)
    sk, sc = _curve(synth)
    if rk.size == 0 and sk.size == 0:
        return 0.0
    if rk.size == 0 or sk.size == 0:
        return 1.0
    if normalized:
        rx, ry = np.log(rk / rk.max()), rc / rc.max()
        sx, sy = np.log(sk / sk.max()), sc / sc.max()
        t = np.log(np.geomspace(rk.min() / rk.max(), 1.0, DCC_POINTS))
    else:
        rx, ry = np.log(rk), rc
        sx, sy = np.log(sk), sc
        t = np.log(np.geomspace(rk.min(), rk.max(), DCC_POINTS))
    r_vals = np.interp(t, rx, ry)
    s_vals = np.interp(t, sx, sy)
    mask = r_vals > 0
    return float(np.mean(np.abs(r_vals[mask] - s_vals[mask]) / r_vals[mask]))


def dcc_raw(real: DegreeDistribution, synth: DegreeDistribution) -> float:
    """Curve error on raw (unnormalized) degree/count axes."""
    return _dcc_interpolated(real, synth, normalized=False)


def dcc_normalized(real: DegreeDistribution, synth: DegreeDistribution) -> float:
    """Curve error after max-degree/max-count scaling of each curve."""
    return _dcc_interpolated(real, synth, normalized=True)


def dcc(real: DegreeDistribution, synth: DegreeDistribution) -> float:
    """Degree-distribution curve error; 0 means identical curves.

    Graphs of identical size (same node and edge counts) skip the
    normalization step; otherwise both curves are normalized first so
    graphs of different scales remain comparable.
    """
    if real.n_nodes == synth.n_nodes and real.edge_count == synth.edge_count:
        return dcc_raw(real, synth)
    return dcc_normalized(real, synth)


def degree_dist_score(real: DegreeDistribution, synth: DegreeDistribution) -> float:
    """Higher-is-better transform of the curve error, clamped to [0, 1]."""
    return max(0.0, 1.0 - dcc(real, synth))


def _entropy(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def theils_u(x: np.ndarray, y: np.ndarray) -> float:
    """Uncertainty coefficient U(x|y) = (H(x) - H(x|y)) / H(x), in [0, 1].

    Asymmetric by construction; H(x) = 0 yields 0 by convention.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape or x.size == 0:
        raise DataError("Theil's U needs two equal-length non-empty columns")
    nx = int(x.max()) + 1
    ny = int(y.max()) + 1
    joint = np.zeros((nx, ny), dtype=np.float64)
    np.add.at(joint, (x, y), 1.0)
    hx = _entropy(joint.sum(axis=1))
    if hx == 0.0:
        return 0.0
    n = joint.sum()
    h_cond = 0.0
    for j in range(ny):
        col = joint[:, j]
        tot = col.sum()
        if tot > 0:
            h_cond += (tot / n) * _entropy(col)
    return float(min(max((hx - h_cond) / hx, 0.0), 1.0))


def correlation_ratio(categories: np.ndarray, values: np.ndarray) -> float:
    """eta = sqrt(between-group variance / total variance), in [0, 1]."""
    categories = np.asarray(categories, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if categories.shape != values.shape or values.size == 0:
        raise DataError("correlation ratio needs two equal-length non-empty columns")
    total = float(((values - values.mean()) ** 2).sum())
    if total == 0.0:
        return 0.0
    grand = values.mean()
    between = 0.0
    for g in np.unique(categories):
        grp = values[categories == g]
        between += grp.size * (grp.mean() - grand) ** 2
    return float(min(max(np.sqrt(between / total), 0.0), 1.0))


def _abs_pearson(x: np.ndarray, y: np.ndarray) -> float:
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        return 0.0
    return float(min(abs(np.corrcoef(x, y)[0, 1]), 1.0))


def association_matrix(table: FeatureTable) -> np.ndarray:
    """Pairwise association: |Pearson| for continuous pairs, correlation
    ratio for mixed pairs, Theil's U (direction row|column) for
    categorical pairs. Diagonal is 1."""
    d = len(table.schema)
    out = np.eye(d)
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            si, sj = table.schema[i], table.schema[j]
            ci, cj = table.columns[i], table.columns[j]
            if si.kind == "continuous" and sj.kind == "continuous":
                if j < i:
                    out[i, j] = out[j, i]
                else:
                    out[i, j] = _abs_pearson(ci, cj)
            elif si.kind == "categorical" and sj.kind == "categorical":
                out[i, j] = theils_u(ci, cj)
            elif si.kind == "categorical":
                out[i, j] = correlation_ratio(ci, cj)
            else:
                out[i, j] = correlation_ratio(cj, ci)
    return out


def feature_corr_score(real: FeatureTable, synth: FeatureTable) -> float:
    """1 - mean absolute difference of the two association matrices."""
    real_names = [(s.name, s.kind) for s in real.schema]
    synth_names = [(s.name, s.kind) for s in synth.schema]
    if real_names != synth_names:
        raise DataError(f"schema mismatch: {real_names} vs {synth_names}")
    d = len(real.schema)
    if d < 2:
        logger.warning("feature correlation score is vacuous with %d column(s)", d)
        return 1.0
    diff = np.abs(association_matrix(real) - association_matrix(synth))
    off = ~np.eye(d, dtype=bool)
    return float(1.0 - diff[off].mean())


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in bits; symmetric, in [0, 1]."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)
    kl_p = np.where(p > 0, p * (np.log2(np.where(p > 0, p, 1.0)) - np.log2(np.where(m > 0, m, 1.0))), 0.0)
    kl_q = np.where(q > 0, q * (np.log2(np.where(q > 0, q, 1.0)) - np.log2(np.where(m > 0, m, 1.0))), 0.0)
    return float(0.5 * kl_p.sum() + 0.5 * kl_q.sum())


def degree_bucket(degrees: np.ndarray) -> np.ndarray:
    """Log2 bucket index: 0 -> 0, 1 -> 1, 2-3 -> 2, 4-7 -> 3, ..."""
    degrees = np.asarray(degrees, dtype=np.int64)
    out = np.zeros(degrees.shape, dtype=np.int64)
    pos = degrees >= 1
    capped = np.minimum(degrees[pos], DEGREE_BUCKET_CAP)
    out[pos] = np.minimum(np.floor(np.log2(capped)).astype(np.int64) + 1, N_DEGREE_BUCKETS - 1)
    return out


@dataclass(frozen=True, eq=False)
class FeatureBinning:
    """Feature-value binning fixed from the real data side."""

    kind: str
    edges: np.ndarray | None = None  # continuous: interior quantile cuts
    top_values: tuple[str, ...] = ()  # categorical: most frequent values

    @property
    def n_bins(self) -> int:
        return N_FEATURE_BINS

    def apply(self, column: np.ndarray, spec) -> np.ndarray:
        if self.kind == "continuous":
            return np.searchsorted(self.edges, column, side="right")
        lookup = {v: i for i, v in enumerate(self.top_values)}
        vocab = spec.vocabulary
        return np.array(
            [lookup.get(vocab[c], TOP_CATEGORIES) for c in column], dtype=np.int64
        )


def fit_feature_binning(column: np.ndarray, spec) -> FeatureBinning:
    if spec.kind == "continuous":
        qs = np.linspace(0.0, 1.0, N_FEATURE_BINS + 1)[1:-1]
        return FeatureBinning(kind="continuous", edges=np.quantile(column, qs))
    counts = np.bincount(column, minlength=len(spec.vocabulary))
    top = np.argsort(-counts, kind="stable")[:TOP_CATEGORIES]
    return FeatureBinning(
        kind="categorical",
        top_values=tuple(spec.vocabulary[i] for i in top),
    )


def _joint_observations(graph: PartiteGraph) -> list[tuple[str, object, np.ndarray, np.ndarray]]:
    """(column name, spec, degree array, value array) per feature column.

    Edge feature columns contribute one observation per endpoint (the
    endpoint's incident-edge count paired with the edge's value); node
    feature columns contribute one observation per node.
    """
    obs = []
    incident: dict[str, np.ndarray] = {
        name: np.zeros(size, dtype=np.int64) for name, size in graph.partites
    }
    for (src, dst), arr in zip(graph.edge_types, graph.edges):
        incident[src] += np.bincount(arr[:, 0], minlength=graph.partite_size(src))
        incident[dst] += np.bincount(arr[:, 1], minlength=graph.partite_size(dst))
    for (src, dst), arr, table in zip(graph.edge_types, graph.edges, graph.edge_features):
        if table is None:
            continue
        deg = np.concatenate([incident[src][arr[:, 0]], incident[dst][arr[:, 1]]])
        for spec, col in zip(table.schema, table.columns):
            obs.append((spec.name, spec, deg, np.concatenate([col, col])))
    for pname, table in graph.node_features.items():
        for spec, col in zip(table.schema, table.columns):
            obs.append((spec.name, spec, incident[pname], col))
    return obs


def degree_feature_js(real: PartiteGraph, synth: PartiteGraph) -> float:
    """Mean JS divergence of joint (degree bucket, feature bin) histograms.

    Binning is anchored on the real graph: continuous features use its
    16 quantile bins, categorical features its top-15 values plus an
    overflow bin; degrees use shared log2 buckets.
    """
    real_obs = _joint_observations(real)
    synth_obs = _joint_observations(synth)
    if [(o[0], o[1].kind) for o in real_obs] != [(o[0], o[1].kind) for o in synth_obs]:
        raise DataError("real and synthetic graphs expose different feature columns")
    if not real_obs:
        raise DataError("no feature columns to compare")
    scores = []
    for (name, spec, r_deg, r_val), (_, s_spec, s_deg, s_val) in zip(real_obs, synth_obs):
        binning = fit_feature_binning(r_val, spec)
        shape = (N_DEGREE_BUCKETS, binning.n_bins)
        hist_r = np.zeros(shape)
        hist_s = np.zeros(shape)
        np.add.at(hist_r, (degree_bucket(r_deg), binning.apply(r_val, spec)), 1.0)
        np.add.at(hist_s, (degree_bucket(s_deg), binning.apply(s_val, s_spec)), 1.0)
        scores.append(js_divergence(hist_r, hist_s))
    return float(np.mean(scores))


@dataclass(eq=False)
class MetricsReport:
    degree_dist_score: float
    feature_corr_score: float
    degree_feature_js: float
    dcc_values: dict  # "src__dst/out" -> raw curve error
    degree_histograms: dict  # "src__dst/out/real" -> DegreeDistribution
    hop_real: np.ndarray = field(default=None)
    hop_synth: np.ndarray = field(default=None)
    effective_diameter_real: int = 0
    effective_diameter_synth: int = 0
    association_real: dict = field(default_factory=dict)  # type name -> matrix
    association_synth: dict = field(default_factory=dict)
    column_names: dict = field(default_factory=dict)  # type name -> list

    def scores(self) -> dict:
        return {
            "degree_dist_score": self.degree_dist_score,
            "feature_corr_score": self.feature_corr_score,
            "degree_feature_js": self.degree_feature_js,
            "effective_diameter_real": self.effective_diameter_real,
            "effective_diameter_synth": self.effective_diameter_synth,
        }


def hop_plot_compare(real: PartiteGraph, synth: PartiteGraph, max_hops: int = 10,
                     num_sources: int = 256, seed: int = 0):
    """Paired hop-plot curves and effective diameters (plot-ready data)."""
    hr = hop_plot(real.global_edge_array(), real.n_nodes_total, max_hops, num_sources, seed)
    hs = hop_plot(synth.global_edge_array(), synth.n_nodes_total, max_hops, num_sources, seed)
    return hr, hs, effective_diameter(hr), effective_diameter(hs)


def compute_report(real: PartiteGraph, synth: PartiteGraph, max_hops: int = 10,
                   num_sources: int = 256, seed: int = 0) -> MetricsReport:
    """Full fidelity report; edge types are matched by partite names."""
    if real.edge_types != synth.edge_types:
        raise DataError(
            f"edge types differ: {real.edge_types} vs {synth.edge_types}"
        )
    degree_scores = []
    dcc_values = {}
    degree_histograms = {}
    for i, (src, dst) in enumerate(real.edge_types):
        for direction in ("out", "in"):
            rd = degree_distribution(real, i, direction)
            sd = degree_distribution(synth, i, direction)
            key = f"{src}__{dst}/{direction}"
            dcc_values[key] = dcc(rd, sd)
            degree_scores.append(max(0.0, 1.0 - dcc_values[key]))
            degree_histograms[key + "/real"] = rd
            degree_histograms[key + "/synth"] = sd

    corr_scores = []
    association_real = {}
    association_synth = {}
    column_names = {}
    for i, (src, dst) in enumerate(real.edge_types):
        rt, st = real.edge_features[i], synth.edge_features[i]
        if rt is None and st is None:
            continue
        if rt is None or st is None:
            raise DataError(f"edge features present on only one side of {src}__{dst}")
        corr_scores.append(feature_corr_score(rt, st))
        key = f"{src}__{dst}"
        association_real[key] = association_matrix(rt)
        association_synth[key] = association_matrix(st)
        column_names[key] = rt.column_names

    hr, hs, ed_r, ed_s = hop_plot_compare(real, synth, max_hops, num_sources, seed)
    return MetricsReport(
        degree_dist_score=float(np.mean(degree_scores)),
        feature_corr_score=float(np.mean(corr_scores)) if corr_scores else 1.0,
        degree_feature_js=degree_feature_js(real, synth),
        dcc_values=dcc_values,
        degree_histograms=degree_histograms,
        hop_real=hr,
        hop_synth=hs,
        effective_diameter_real=ed_r,
        effective_diameter_synth=ed_s,
        association_real=association_real,
        association_synth=association_synth,
        column_names=column_names,
    )

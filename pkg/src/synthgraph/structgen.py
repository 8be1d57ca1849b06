"""Recursive-matrix structural model: fitting and edge sampling.

The edge-cell distribution over a 2^n x 2^m grid is the Kronecker product
of a 2x2 seed matrix with itself min(n, m) times, padded on the longer
dimension by the seed's marginal vector. Fitting recovers the seed from
the observed in/out degree distributions plus per-level quadrant MLE
ratios; sampling descends the levels per edge with optional per-level
noise and rejects duplicates and out-of-range ids.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import CapacityError, DataError, FitError
from .graph import DegreeDistribution

logger = logging.getLogger(__name__)

# stream tags keep the sampler's RNG streams disjoint from other stages
EDGE_STREAM_TAG = 0xE1
NOISE_STREAM_TAG = 0x4F

MARGINAL_BOUNDS = (1e-6, 1.0 - 1e-6)
GOLDEN_TOL = 1e-4
RETRY_CAP_FACTOR = 100
FLAG_DEDUP_CELLS = 1 << 27  # <= 128 MB of seen-flags; larger grids dedup by sorted keys


@dataclass(frozen=True)
class SeedMatrix:
    """2x2 probability matrix [[a, b], [c, d]]; entries sum to 1."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        entries = (self.a, self.b, self.c, self.d)
        if min(entries) < -1e-12:
            raise ValueError(f"negative seed entry in {entries}")
        if abs(sum(entries) - 1.0) > 1e-9:
            raise ValueError(f"seed entries sum to {sum(entries)}, not 1")

    @property
    def p(self) -> float:
        """Row marginal: probability of choosing the top half."""
        return self.a + self.b

    @property
    def q(self) -> float:
        """Column marginal: probability of choosing the left half."""
        return self.a + self.c

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.float64)


@dataclass(frozen=True)
class ShapePlan:
    """Grid exponents for an N x M partite pair.

    The grid is 2^n x 2^m; the first square_levels descent steps use the
    full seed, the remaining pad levels on the longer dimension use its
    marginal. Pad bits are the low-order bits of that dimension's ids.
    """

    n: int
    m: int
    n_rows: int
    n_cols: int

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise DataError("partite sizes must be >= 1")
        if self.n_rows > 2 ** self.n or self.n_cols > 2 ** self.m:
            raise DataError("grid exponents too small for partite sizes")

    @property
    def square_levels(self) -> int:
        return min(self.n, self.m)

    @property
    def row_pad_levels(self) -> int:
        return self.n - self.square_levels

    @property
    def col_pad_levels(self) -> int:
        return self.m - self.square_levels

    @property
    def total_levels(self) -> int:
        return max(self.n, self.m)

    @property
    def capacity(self) -> int:
        return self.n_rows * self.n_cols


def plan_shape(n_rows: int, n_cols: int) -> ShapePlan:
    """Grid plan with n = ceil(log2 N), m = ceil(log2 M)."""
    if n_rows < 1 or n_cols < 1:
        raise DataError("partite sizes must be >= 1")
    return ShapePlan(
        n=(n_rows - 1).bit_length(),
        m=(n_cols - 1).bit_length(),
        n_rows=n_rows,
        n_cols=n_cols,
    )


@dataclass(frozen=True, eq=False)
class NoiseConfig:
    """Per-level noise scalars n_f plus the strength that produced them."""

    noise_strength: float
    level_noise: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.noise_strength <= 1.0:
            raise DataError("noise strength must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class SeedModel:
    """Everything needed to sample one edge type's structure."""

    seed: SeedMatrix
    shape: ShapePlan
    e_target: int
    noise: NoiseConfig
    ratios: tuple[float, float]
    noise_seed: int = 0

    def __post_init__(self):
        if self.e_target < 0:
            raise DataError("target edge count must be >= 0")
        if self.e_target > self.shape.capacity:
            raise CapacityError(
                f"target edge count {self.e_target} exceeds grid capacity "
                f"{self.shape.n_rows} x {self.shape.n_cols}"
            )
        if len(self.noise.level_noise) != self.shape.total_levels:
            raise DataError("noise level count does not match shape")

    @property
    def density(self) -> float:
        return self.e_target / self.shape.capacity


def _log1mexp(logx: np.ndarray) -> np.ndarray:
    """log(1 - exp(logx)) for logx < 0, stable near both ends."""
    logx = np.asarray(logx, dtype=np.float64)
    out = np.empty_like(logx)
    small = logx < -math.log(2.0)
    out[small] = np.log1p(-np.exp(logx[small]))
    out[~small] = np.log(-np.expm1(logx[~small]))
    return out


def expected_degree_counts(marginal: float, levels: int, n_edges: int,
                           k_max: int) -> np.ndarray:
    """Expected node counts per degree under the marginal-product model.

    c_hat_k = C(E, k) * sum_i C(levels, i) P_i^k (1 - P_i)^(E - k) with
    P_i = marginal^(levels - i) * (1 - marginal)^i, evaluated in log space.
    Rows with i high bits set share the hit probability P_i, hence the
    binomial multiplicity. Valid for either direction: pass the row
    marginal with the row exponent, or the column marginal with the
    column exponent.
    """
    if not 0.0 < marginal < 1.0:
        raise FitError(f"marginal must lie in (0, 1), got {marginal}")
    if n_edges < 0 or k_max < 0:
        raise FitError("edge count and k_max must be >= 0")

    k = np.arange(k_max + 1, dtype=np.float64)
    if levels == 0:
        # single row: it receives all E edges
        out = np.zeros(k_max + 1)
        if n_edges <= k_max:
            out[n_edges] = 1.0
        return out

    i = np.arange(levels + 1, dtype=np.float64)
    log_p_i = (levels - i) * math.log(marginal) + i * math.log1p(-marginal)
    log_1m_p_i = _log1mexp(log_p_i)
    log_mult = gammaln(levels + 1) - gammaln(i + 1) - gammaln(levels - i + 1)

    valid = k <= n_edges
    kv = k[valid]
    log_choose_e = (
        gammaln(n_edges + 1) - gammaln(kv + 1) - gammaln(n_edges - kv + 1)
    )
    inner = (
        log_mult[None, :]
        + kv[:, None] * log_p_i[None, :]
        + (n_edges - kv)[:, None] * log_1m_p_i[None, :]
    )
    out = np.zeros(k_max + 1)
    out[valid] = np.exp(log_choose_e + logsumexp(inner, axis=1))
    return out


def expected_out_degree_counts(p: float, levels: int, n_edges: int,
                               k_max: int) -> np.ndarray:
    """Out-degree counts: row marginal p paired with the row exponent."""
    return expected_degree_counts(p, levels, n_edges, k_max)


def expected_in_degree_counts(q: float, levels: int, n_edges: int,
                              k_max: int) -> np.ndarray:
    """In-degree counts: column marginal q paired with the column exponent."""
    return expected_degree_counts(q, levels, n_edges, k_max)


def degree_count_loss(marginal: float, levels: int, n_edges: int,
                      observed: np.ndarray) -> float:
    """Sum of squared count errors over degrees 0..k_max."""
    predicted = expected_degree_counts(marginal, levels, n_edges, len(observed) - 1)
    diff = observed - predicted
    return float(diff @ diff)


def golden_section(fn, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Minimize a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = (3.0 - math.sqrt(5.0)) / 2.0
    a, b = lo, hi
    h = b - a
    c = a + invphi2 * h
    d = a + invphi * h
    fc, fd = fn(c), fn(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + invphi2 * h
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + invphi * h
            fd = fn(d)
    return (a + b) / 2.0


def mle_quadrant_ratios(edges: np.ndarray, shape: ShapePlan) -> tuple[float, float]:
    """Pooled per-level quadrant frequencies -> (a/b, a/c) estimates.

    At every square level each edge picks one of four quadrants by its
    (row bit, col bit); under independent per-level choices the MLE of
    the seed is the pooled quadrant frequency (Laplace +1 smoothing).
    """
    if edges.size == 0:
        raise DataError("cannot estimate quadrant ratios from an empty edge list")
    rows = edges[:, 0].astype(np.int64)
    cols = edges[:, 1].astype(np.int64)
    counts = np.ones(4, dtype=np.float64)  # Laplace prior
    s = shape.square_levels
    for t in range(s):
        row_bit = (rows >> (shape.n - 1 - t)) & 1
        col_bit = (cols >> (shape.m - 1 - t)) & 1
        quad = row_bit * 2 + col_bit
        counts += np.bincount(quad, minlength=4)
    freq = counts / counts.sum()
    return float(freq[0] / freq[1]), float(freq[0] / freq[2])


def quadrant_bit_fractions(edges: np.ndarray, shape: ShapePlan) -> tuple[float, float]:
    """Observed fraction of zero row bits and zero col bits.

    Pooled over every bit position of each dimension; under the model the
    row fraction estimates p = a+b and the column fraction estimates
    q = a+c, independent of the degree curve.
    """
    if edges.size == 0:
        raise DataError("cannot estimate bit fractions from an empty edge list")
    rows = edges[:, 0].astype(np.int64)
    cols = edges[:, 1].astype(np.int64)
    row_zero = 0.5 if shape.n == 0 else float(
        np.mean([((rows >> t) & 1 == 0).mean() for t in range(shape.n)])
    )
    col_zero = 0.5 if shape.m == 0 else float(
        np.mean([((cols >> t) & 1 == 0).mean() for t in range(shape.m)])
    )
    return row_zero, col_zero


def _fit_marginal(levels: int, n_edges: int, observed: np.ndarray,
                  hint: float | None) -> float:
    """Golden-section fit of one marginal over the degree-count loss.

    {P_i} is invariant under x -> 1-x, making the loss exactly mirror
    symmetric with minima in both halves. Each half is searched on its
    own; the observed zero-bit fraction picks the branch, defaulting to
    the upper one when no hint is available.
    """
    if levels == 0:
        return 0.5
    lo, hi = MARGINAL_BOUNDS
    loss = lambda v: degree_count_loss(v, levels, n_edges, observed)
    x_hi = golden_section(loss, 0.5, hi)
    if hint is None:
        return x_hi
    x_lo = golden_section(loss, lo, 0.5)
    return x_lo if abs(x_lo - hint) < abs(x_hi - hint) else x_hi


def fit_seed(dd_out: DegreeDistribution, dd_in: DegreeDistribution,
             shape: ShapePlan, n_edges: int, ratios: tuple[float, float],
             report: dict | None = None,
             bit_fractions: tuple[float, float] | None = None) -> SeedMatrix:
    """Fit the seed matrix from degree distributions and quadrant ratios.

    The squared count loss separates: the out-degree term depends only on
    the row marginal p and the in-degree term only on the column marginal
    q, so each is minimized by an independent golden-section search. The
    four entries are then recovered from (p, q) by solving a/b = ratio_ab
    exactly where feasible, clamping a into the simplex otherwise.

    `bit_fractions` (observed zero row-bit and col-bit fractions) resolve
    the p vs 1-p mirror ambiguity of the degree curve; without them the
    upper branch is the convention.
    """
    if n_edges <= 0:
        raise FitError("need a positive edge count to fit")
    obs_out = dd_out.as_vector()
    obs_in = dd_in.as_vector()
    row_hint, col_hint = bit_fractions if bit_fractions is not None else (None, None)
    p = _fit_marginal(shape.n, n_edges, obs_out, row_hint)
    q = _fit_marginal(shape.m, n_edges, obs_in, col_hint)

    ratio_ab = max(ratios[0], 0.0)
    a_exact = ratio_ab * p / (1.0 + ratio_ab)
    a_lo = max(0.0, p + q - 1.0)
    a_hi = min(p, q)
    a = min(max(a_exact, a_lo), a_hi)
    clamped = a != a_exact
    if clamped:
        logger.warning(
            "quadrant ratio %.4g infeasible for p=%.4f q=%.4f; clamped a to %.4f",
            ratio_ab, p, q, a,
        )
    b = p - a
    c = q - a
    d = max(0.0, 1.0 - p - q + a)
    if report is not None:
        report.update(
            p=p, q=q, a=a, b=b, c=c, d=d, clamped=clamped,
            loss_out=degree_count_loss(p, shape.n, n_edges, obs_out),
            loss_in=degree_count_loss(q, shape.m, n_edges, obs_in),
        )
    return SeedMatrix(a, b, c, d)


def noise_bound(seed: SeedMatrix) -> float:
    """Upper limit keeping a perturbed seed a valid distribution."""
    return min((seed.a + seed.d) / 2.0, seed.b, seed.c)


def sample_noise(seed: SeedMatrix, noise_strength: float, levels: int,
                 noise_seed: int = 0) -> NoiseConfig:
    """Draw one noise scalar per level, n_f ~ U[0, strength * bound].

    Each level uses its own counter-based stream keyed by (noise_seed,
    level index), so extending a model to more levels preserves the
    noise already drawn for existing levels.
    """
    if not 0.0 <= noise_strength <= 1.0:
        raise DataError("noise strength must lie in [0, 1]")
    bound = noise_bound(seed)
    values = np.zeros(levels, dtype=np.float64)
    if noise_strength > 0.0 and bound > 0.0 and seed.a + seed.d > 0.0:
        for i in range(levels):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence([noise_seed, NOISE_STREAM_TAG, i]))
            )
            values[i] = rng.uniform(0.0, noise_strength * bound)
    return NoiseConfig(noise_strength=noise_strength, level_noise=values)


def perturbed_seed(seed: SeedMatrix, n_f: float) -> SeedMatrix:
    """Apply the zero-sum noise matrix for one level.

    Additive noise [[-2 n_f a/(a+d), +n_f], [+n_f, -2 n_f d/(a+d)]]: the
    entries sum to zero and, for n_f within noise_bound, the perturbed
    matrix stays a probability distribution.
    """
    ad = seed.a + seed.d
    if n_f == 0.0 or ad == 0.0:
        return seed
    return SeedMatrix(
        seed.a - 2.0 * n_f * seed.a / ad,
        seed.b + n_f,
        seed.c + n_f,
        seed.d - 2.0 * n_f * seed.d / ad,
    )


def perturbed_marginal(seed: SeedMatrix, n_f: float, axis: str) -> float:
    """Row or column marginal of the perturbed seed for pad levels."""
    ad = seed.a + seed.d
    base = seed.p if axis == "row" else seed.q
    if n_f == 0.0 or ad == 0.0:
        return base
    return base + n_f * (seed.d - seed.a) / ad


def level_parameters(model: SeedModel) -> list[tuple[str, tuple[float, ...]]]:
    """Per-level descent parameters after noise perturbation.

    Square levels come first (they set the high bits of both ids), then
    the pad levels of the longer dimension (low bits). Square entries are
    cumulative quadrant thresholds; pad entries are the zero-bit odds.
    """
    plan = model.shape
    params: list[tuple[str, tuple[float, ...]]] = []
    for t in range(plan.total_levels):
        n_f = float(model.noise.level_noise[t])
        if t < plan.square_levels:
            s = perturbed_seed(model.seed, n_f)
            params.append(("square", (s.a, s.a + s.b, s.a + s.b + s.c)))
        elif plan.row_pad_levels:
            params.append(("row_pad", (perturbed_marginal(model.seed, n_f, "row"),)))
        else:
            params.append(("col_pad", (perturbed_marginal(model.seed, n_f, "col"),)))
    return params


def draw_cells(model: SeedModel, count: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Raw level-descent draws: (rows, cols) with replacement, no filtering."""
    rows = np.zeros(count, dtype=np.int64)
    cols = np.zeros(count, dtype=np.int64)
    # scratch buffers reused across levels; one uniform per draw per level
    u = np.empty(count, dtype=np.float64)
    b1 = np.empty(count, dtype=bool)
    b2 = np.empty(count, dtype=bool)
    for kind, param in level_parameters(model):
        rng.random(out=u)
        if kind == "square":
            c_a, c_ab, c_abc = param
            rows <<= 1
            cols <<= 1
            # col bit set in quadrants b (u in [c_a, c_ab)) and d (u >= c_abc)
            np.greater_equal(u, c_a, out=b1)
            np.less(u, c_ab, out=b2)
            np.logical_and(b1, b2, out=b1)
            np.greater_equal(u, c_abc, out=b2)
            np.logical_or(b1, b2, out=b1)
            cols += b1
            np.greater_equal(u, c_ab, out=b1)
            rows += b1
        elif kind == "row_pad":
            rows <<= 1
            np.greater_equal(u, param[0], out=b1)
            rows += b1
        else:
            cols <<= 1
            np.greater_equal(u, param[0], out=b1)
            cols += b1
    return rows, cols


def _worker_rng(rng_seed: int, worker: int, round_idx: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(
            np.random.SeedSequence([rng_seed, EDGE_STREAM_TAG, worker, round_idx])
        )
    )


def sample_edges(model: SeedModel, n_edges: int | None = None,
                 rng_seed: int = 0, workers: int = 1) -> np.ndarray:
    """Sample distinct in-range edge cells; deterministic per (seed, workers).

    Draws are partitioned across `workers` counter-based streams per
    round; each round's candidates are merged in worker order, filtered
    against ids >= N or >= M, and deduplicated keeping first occurrence.
    Rounds repeat until n_edges cells are collected or the total-draw
    budget (100x the requested count) is exhausted.
    """
    if workers < 1:
        raise DataError("worker count must be >= 1")
    e_target = model.e_target if n_edges is None else int(n_edges)
    plan = model.shape
    if e_target > plan.capacity:
        raise CapacityError(
            f"{e_target} edges cannot fit a {plan.n_rows} x {plan.n_cols} grid"
        )
    if e_target == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if plan.n + plan.m > 62:
        raise CapacityError("grid exponents exceed 62 bits of cell addressing")

    draw_budget = RETRY_CAP_FACTOR * e_target
    drawn_total = 0
    overdraw = 1.3
    # dedup state: a flat seen-flag table when the grid is small enough,
    # otherwise a sorted array of accepted keys; both keep the same edges
    # in the same stream order, the flag table just skips the O(n log n)
    # sort of raw candidates that dominates at 10^7-edge scale
    universe = 1 << (plan.n + plan.m)
    seen = np.zeros(universe, dtype=bool) if universe <= FLAG_DEDUP_CELLS else None
    accepted_sorted = np.zeros(0, dtype=np.int64)
    full_grid = plan.n_rows == 1 << plan.n and plan.n_cols == 1 << plan.m
    out_rows: list[np.ndarray] = []
    out_cols: list[np.ndarray] = []
    accepted_count = 0
    round_idx = 0

    while accepted_count < e_target:
        need = e_target - accepted_count
        want = min(int(math.ceil(need * overdraw)) + 64, draw_budget - drawn_total)
        if want <= 0:
            raise CapacityError(
                f"draw budget exhausted after {drawn_total} draws with "
                f"{accepted_count}/{e_target} distinct edges; the requested "
                "density is too close to grid capacity, reduce the edge count"
            )
        per_worker = (want + workers - 1) // workers
        rows_parts, cols_parts = [], []
        for w in range(workers):
            r, c = draw_cells(model, per_worker, _worker_rng(rng_seed, w, round_idx))
            rows_parts.append(r)
            cols_parts.append(c)
        drawn_total += per_worker * workers
        rows = np.concatenate(rows_parts)
        cols = np.concatenate(cols_parts)
        if full_grid:
            keys = (rows << plan.m) | cols
        else:
            in_range = (rows < plan.n_rows) & (cols < plan.n_cols)
            keys = (rows[in_range] << plan.m) | cols[in_range]

        if seen is not None:
            keys = keys[~seen[keys]]
            # first occurrence within the round, in stream order
            _, first_idx = np.unique(keys, return_index=True)
            keys = keys[np.sort(first_idx)]
            fresh = keys.size
            keys = keys[:need]
            seen[keys] = True
        else:
            _, first_idx = np.unique(keys, return_index=True)
            keys = keys[np.sort(first_idx)]
            if accepted_sorted.size:
                pos = np.searchsorted(accepted_sorted, keys)
                pos = np.minimum(pos, accepted_sorted.size - 1)
                keys = keys[accepted_sorted[pos] != keys]
            fresh = keys.size
            keys = keys[:need]
            if keys.size:
                fresh_sorted = np.sort(keys)
                if accepted_sorted.size:
                    accepted_sorted = np.insert(
                        accepted_sorted,
                        np.searchsorted(accepted_sorted, fresh_sorted),
                        fresh_sorted,
                    )
                else:
                    accepted_sorted = fresh_sorted
        if keys.size:
            out_rows.append(keys >> plan.m)
            out_cols.append(keys & ((1 << plan.m) - 1))
            accepted_count += keys.size
        yield_rate = fresh / max(per_worker * workers, 1)
        overdraw = min(max(1.2, 1.2 / max(yield_rate, 0.05)), 8.0)
        round_idx += 1

    return np.column_stack([np.concatenate(out_rows), np.concatenate(out_cols)])


def scale_model(model: SeedModel, scale: float, n_rows: int | None = None,
                n_cols: int | None = None) -> SeedModel:
    """Rescale to sqrt(S) x the nodes and S x the edges; density preserved.

    Node counts may be overridden (multi-edge-type pipelines scale shared
    partites once); seed matrix, ratios, and noise strength are reused.
    Per-level noise is re-materialized from the stored noise seed, which
    reproduces existing levels exactly and extends new ones.
    """
    if scale <= 0:
        raise DataError("scale factor must be positive")
    root = math.sqrt(scale)
    new_rows = n_rows if n_rows is not None else max(1, int(math.floor(model.shape.n_rows * root + 0.5)))
    new_cols = n_cols if n_cols is not None else max(1, int(math.floor(model.shape.n_cols * root + 0.5)))
    new_edges = int(math.floor(model.e_target * scale + 0.5))
    shape = plan_shape(new_rows, new_cols)
    if new_edges > shape.capacity:
        raise CapacityError(
            f"scaled edge count {new_edges} exceeds capacity {shape.capacity}"
        )
    noise = sample_noise(
        model.seed, model.noise.noise_strength, shape.total_levels, model.noise_seed
    )
    return replace(model, shape=shape, e_target=new_edges, noise=noise)

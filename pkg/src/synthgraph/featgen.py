"""Tabular feature model: mode-specific normalization plus a joint mixture.

Continuous columns are encoded per value as (Gaussian mode id, scalar in
[-1, 1] relative to that mode); a diagonal-covariance Gaussian mixture is
then fit over the full normalized representation (within-mode scalars
plus one-hot mode indicators), with per-component frequency tables for
every categorical column (real categoricals and the mode ids alike).
The independent backend is the same model with a single component, which
reduces it to per-column marginals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from .errors import DataError, FitError
from .graph import ColumnSpec, FeatureTable

FEATURE_STREAM_TAG = 0xFA
MODE_PREFIX = "mode::"
NORMALIZER_BIC_GRID = tuple(range(1, 11))
MIXTURE_BIC_GRID = (1, 2, 4, 8, 16)
JOINT_VARIANCE_FLOOR = 1e-9
DEGENERATE_VARIANCE = 1e-8  # at or below: component emits its mean exactly


@dataclass(frozen=True, eq=False)
class ContinuousNormalizer:
    """Per-column 1-D Gaussian mixture used for mode-specific encoding."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        if not (len(self.weights) == len(self.means) == len(self.variances)):
            raise DataError("normalizer parameter lengths differ")
        if np.any(self.variances <= 0):
            raise DataError("normalizer variances must be positive")

    @property
    def n_modes(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class EmbeddingSpec:
    """Suggested dense-embedding width for a categorical vocabulary."""

    vocab_size: int
    width: int


def embedding_size(vocab_size: int) -> int:
    """min(600, round(1.6 * |D|^0.56))."""
    if vocab_size < 1:
        raise DataError("vocabulary size must be >= 1")
    return int(min(600, np.round(1.6 * vocab_size ** 0.56)))


def fit_normalizer(values: np.ndarray, max_modes: int = 10, seed: int = 0) -> ContinuousNormalizer:
    """EM fit of a 1-D mixture, mode count chosen by BIC over 1..max_modes.

    Constant columns (and tiny samples, < 10 values) collapse to a single
    mode with a floored variance instead of running EM.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise FitError("cannot fit a normalizer on an empty column")
    if not np.all(np.isfinite(values)):
        raise DataError("normalizer input contains non-finite values")
    sample_var = float(np.var(values))
    floor = max(1e-6 * sample_var, 1e-12)
    if sample_var == 0.0 or values.size < 10:
        return ContinuousNormalizer(
            weights=np.array([1.0]),
            means=np.array([float(np.mean(values))]),
            variances=np.array([max(sample_var, floor)]),
        )

    x = values.reshape(-1, 1)
    grid = [g for g in range(1, max_modes + 1) if g <= np.unique(values).size]
    best = None
    best_bic = np.inf
    for g in grid:
        gm = _fit_gmm(x, n_components=g, reg_covar=floor, seed=seed)
        bic = gm.bic(x)
        if bic < best_bic:
            best_bic = bic
            best = gm
    return ContinuousNormalizer(
        weights=best.weights_.copy(),
        means=best.means_[:, 0].copy(),
        variances=best.covariances_[:, 0].copy(),
    )


def _fit_gmm(x: np.ndarray, n_components: int, reg_covar: float,
             seed: int) -> GaussianMixture:
    # tol/max_iter are part of the model contract; EM hitting the iteration
    # cap is expected on rough columns and BIC still ranks the fits.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=ConvergenceWarning)
        return GaussianMixture(
            n_components=n_components,
            covariance_type="diag",
            tol=1e-6,
            max_iter=100,
            reg_covar=reg_covar,
            init_params="k-means++",
            random_state=seed,
        ).fit(x)


def _log_responsibilities(values: np.ndarray, nrm: ContinuousNormalizer) -> np.ndarray:
    v = values[:, None]
    return (
        np.log(np.maximum(nrm.weights, 1e-300))[None, :]
        - 0.5 * np.log(2.0 * np.pi * nrm.variances)[None, :]
        - 0.5 * (v - nrm.means[None, :]) ** 2 / nrm.variances[None, :]
    )


def _nudge_for_roundtrip(scalars: np.ndarray, mu: np.ndarray, span: np.ndarray,
                         target: np.ndarray) -> np.ndarray:
    """Adjust scalars by ulps so mu + span * scalar reproduces target bit-exactly."""
    best = scalars.copy()
    unresolved = (mu + span * best) != target
    up = scalars.copy()
    dn = scalars.copy()
    for _ in range(4):
        if not unresolved.any():
            break
        up = np.nextafter(up, np.inf)
        dn = np.nextafter(dn, -np.inf)
        for cand in (up, dn):
            ok = unresolved & ((mu + span * cand) == target) & (np.abs(cand) <= 1.0)
            best[ok] = cand[ok]
            unresolved &= ~ok
    return best


def normalize(values: np.ndarray, nrm: ContinuousNormalizer) -> tuple[np.ndarray, np.ndarray]:
    """Encode each value as (argmax-responsibility mode, within-mode scalar).

    The scalar is (v - mu) / (4 sigma) clipped to [-1, 1]; unclipped
    scalars are nudged by a few ulps so that denormalize inverts exactly
    whenever a representable scalar exists. When mu + 4 sigma * s steps in
    increments coarser than ulp(v) (deep cancellation between mu and the
    scaled scalar) no scalar reproduces v and the round trip is off by at
    most one ulp.
    """
    values = np.asarray(values, dtype=np.float64)
    modes = np.argmax(_log_responsibilities(values, nrm), axis=1).astype(np.int64)
    mu = nrm.means[modes]
    span = 4.0 * np.sqrt(nrm.variances[modes])
    scalars = (values - mu) / span
    unclipped = np.abs(scalars) <= 1.0
    scalars = np.clip(scalars, -1.0, 1.0)
    if unclipped.any():
        scalars[unclipped] = _nudge_for_roundtrip(
            scalars[unclipped], mu[unclipped], span[unclipped], values[unclipped]
        )
    return modes, scalars


def denormalize(modes: np.ndarray, scalars: np.ndarray, nrm: ContinuousNormalizer) -> np.ndarray:
    """Invert normalize: v = mu_mode + 4 sigma_mode * scalar."""
    mu = nrm.means[modes]
    span = 4.0 * np.sqrt(nrm.variances[modes])
    return mu + span * scalars


@dataclass(frozen=True, eq=False)
class FeatureModel:
    """Joint generative model over one feature table's rows."""

    schema: tuple[ColumnSpec, ...]
    backend: str
    normalizers: dict  # continuous column name -> ContinuousNormalizer
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, C): scalar dims first, then mode-indicator dims
    variances: np.ndarray  # (K, C)
    cat_tables: dict  # column name (incl. mode:: pseudo-columns) -> (K, V)
    embeddings: dict  # categorical column name -> EmbeddingSpec
    bic_table: dict  # candidate K -> BIC score (fit diagnostics)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def continuous_columns(self) -> list[str]:
        return [s.name for s in self.schema if s.kind == "continuous"]

    @property
    def categorical_columns(self) -> list[str]:
        return [s.name for s in self.schema if s.kind == "categorical"]


def _component_categorical_table(codes: np.ndarray, vocab_size: int,
                                 resp: np.ndarray) -> np.ndarray:
    """Responsibility-weighted per-component frequencies, Laplace +1."""
    k = resp.shape[1]
    table = np.ones((k, vocab_size), dtype=np.float64)
    for v in range(vocab_size):
        mask = codes == v
        if mask.any():
            table[:, v] += resp[mask].sum(axis=0)
    return table / table.sum(axis=1, keepdims=True)


def fit_feature_model(table: FeatureTable, backend: str = "mixture",
                      seed: int = 0) -> FeatureModel:
    """Fit the joint feature model.

    mixture: K-component diagonal Gaussian mixture over the normalized
    continuous representation, i.e. within-mode scalars plus a one-hot
    mode indicator per multi-modal column (K by BIC over {1,2,4,8,16}),
    plus per-component categorical frequency tables estimated from
    responsibilities. The mode indicators let components track which
    modes co-occur, which is what carries categorical-continuous
    association; without them the scalars alone are near-unimodal and
    BIC collapses to one component.
    independent: identical machinery with K fixed to 1, which factorizes
    into per-column marginals.
    """
    if backend not in ("mixture", "independent"):
        raise DataError(f"unknown feature backend {backend!r}")
    n = table.n_rows
    if n == 0:
        raise DataError("cannot fit a feature model on an empty table")
    for spec in table.schema:
        if spec.name.startswith(MODE_PREFIX):
            raise DataError(f"column name {spec.name!r} collides with mode encoding")

    cont_cols = [s.name for s in table.schema if s.kind == "continuous"]
    cat_cols = [s.name for s in table.schema if s.kind == "categorical"]

    normalizers = {}
    mode_codes = {}
    scalar_mat = np.zeros((n, len(cont_cols)), dtype=np.float64)
    for j, name in enumerate(cont_cols):
        nrm = fit_normalizer(table.column(name), seed=seed)
        normalizers[name] = nrm
        modes, scalars = normalize(table.column(name), nrm)
        mode_codes[name] = modes
        scalar_mat[:, j] = scalars

    onehot_parts = []
    for name in cont_cols:
        g = normalizers[name].n_modes
        if g > 1:
            oh = np.zeros((n, g))
            oh[np.arange(n), mode_codes[name]] = 1.0
            onehot_parts.append(oh)
    joint_mat = np.hstack([scalar_mat] + onehot_parts) if onehot_parts else scalar_mat

    bic_table = {}
    if cont_cols and n < 2:
        # a lone row degenerates to an exact point mass
        weights = np.array([1.0])
        means = scalar_mat.copy()
        variances = np.full((1, len(cont_cols)), JOINT_VARIANCE_FLOOR)
        resp = np.ones((n, 1))
        bic_table[1] = 0.0
    elif cont_cols:
        grid = (1,) if backend == "independent" else MIXTURE_BIC_GRID
        best = None
        best_bic = np.inf
        for k in grid:
            if k > n:
                continue
            gm = _fit_gmm(joint_mat, n_components=k,
                          reg_covar=JOINT_VARIANCE_FLOOR, seed=seed)
            bic = float(gm.bic(joint_mat))
            bic_table[k] = bic
            if bic < best_bic:
                best_bic = bic
                best = gm
        weights = best.weights_.copy()
        means = best.means_.copy()
        variances = best.covariances_.copy()
        resp = best.predict_proba(joint_mat)
    else:
        weights = np.array([1.0])
        means = np.zeros((1, 0))
        variances = np.zeros((1, 0))
        resp = np.ones((n, 1))

    cat_tables = {}
    for name in cat_cols:
        vocab_size = len(table.spec(name).vocabulary)
        cat_tables[name] = _component_categorical_table(
            table.column(name), vocab_size, resp
        )
    for name in cont_cols:
        cat_tables[MODE_PREFIX + name] = _component_categorical_table(
            mode_codes[name], normalizers[name].n_modes, resp
        )

    embeddings = {
        name: EmbeddingSpec(
            len(table.spec(name).vocabulary),
            embedding_size(len(table.spec(name).vocabulary)),
        )
        for name in cat_cols
    }
    return FeatureModel(
        schema=table.schema,
        backend=backend,
        normalizers=normalizers,
        weights=weights,
        means=means,
        variances=variances,
        cat_tables=cat_tables,
        embeddings=embeddings,
        bic_table=bic_table,
    )


def _sample_categorical(table_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row from that row's probability vector."""
    cdf = np.cumsum(table_rows, axis=1)
    u = rng.random(table_rows.shape[0])
    return (u[:, None] > cdf).sum(axis=1).astype(np.int64)


def _sample_block(model: FeatureModel, count: int, rng: np.random.Generator) -> FeatureTable:
    comps = _sample_categorical(
        np.broadcast_to(model.weights, (count, len(model.weights))), rng
    )
    cont_cols = model.continuous_columns
    scalars = np.zeros((count, len(cont_cols)))
    if cont_cols:
        # scalar dims lead; trailing mode-indicator dims only shape components
        mean = model.means[comps][:, :len(cont_cols)]
        var = model.variances[comps][:, :len(cont_cols)]
        z = rng.standard_normal((count, len(cont_cols)))
        scalars = mean + np.sqrt(var) * z
        degenerate = var <= DEGENERATE_VARIANCE
        scalars[degenerate] = mean[degenerate]
        scalars = np.clip(scalars, -1.0, 1.0)

    columns = []
    for spec in model.schema:
        if spec.kind == "categorical":
            columns.append(_sample_categorical(model.cat_tables[spec.name][comps], rng))
        else:
            j = cont_cols.index(spec.name)
            modes = _sample_categorical(
                model.cat_tables[MODE_PREFIX + spec.name][comps], rng
            )
            columns.append(denormalize(modes, scalars[:, j], model.normalizers[spec.name]))
    return FeatureTable(model.schema, tuple(columns))


def sample_features(model: FeatureModel, count: int, rng_seed: int = 0,
                    workers: int = 1) -> FeatureTable:
    """Draw feature rows i.i.d.; deterministic for fixed (seed, workers)."""
    if count < 0:
        raise DataError("sample count must be >= 0")
    if workers < 1:
        raise DataError("worker count must be >= 1")
    if count == 0:
        empty = tuple(
            np.zeros(0, dtype=np.int64 if s.kind == "categorical" else np.float64)
            for s in model.schema
        )
        return FeatureTable(model.schema, empty)
    blocks = []
    for w in range(workers):
        lo = count * w // workers
        hi = count * (w + 1) // workers
        if hi == lo:
            continue
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence([rng_seed, FEATURE_STREAM_TAG, w]))
        )
        blocks.append(_sample_block(model, hi - lo, rng))
    columns = tuple(
        np.concatenate([b.columns[i] for b in blocks])
        for i in range(len(model.schema))
    )
    return FeatureTable(model.schema, columns)

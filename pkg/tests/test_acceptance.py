"""Release gate: one test per acceptance criterion.

Each test carries @pytest.mark.criterion(n, title); conftest prints a
PASS/FAIL line per criterion at the end of the run. Oracles are kept
independent of the code under test: explicit tensor-product matrices,
Monte Carlo replication, brute-force assignment search, and byte-level
file comparison. Workloads are sized so the whole gate finishes in a
few minutes on one core.
"""

import csv
import filecmp
import itertools
import json
import os
import time
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.stats import chisquare

from synthgraph.aligner import rank_match
from synthgraph.featgen import fit_feature_model, sample_features
from synthgraph.graph import ColumnSpec, DegreeDistribution, FeatureTable, PartiteRule
from synthgraph.metrics import dcc, degree_feature_js, js_divergence
from synthgraph.pipeline import (
    PipelineConfig,
    cmd_baseline,
    cmd_evaluate,
    cmd_fit,
    cmd_generate,
    generate_graph,
    load_bundle,
    load_dataset,
    write_dataset,
)
from synthgraph.structgen import (
    NoiseConfig,
    SeedMatrix,
    SeedModel,
    draw_cells,
    expected_in_degree_counts,
    expected_out_degree_counts,
    fit_seed,
    level_parameters,
    mle_quadrant_ratios,
    noise_bound,
    perturbed_seed,
    plan_shape,
    quadrant_bit_fractions,
    sample_edges,
    sample_noise,
    scale_model,
)

SKEWED_SEED = SeedMatrix(0.57, 0.19, 0.19, 0.05)


def _model(seed, n_rows, n_cols, e_target, ratios=(1.0, 1.0)):
    shape = plan_shape(n_rows, n_cols)
    return SeedModel(
        seed=seed, shape=shape, e_target=e_target,
        noise=NoiseConfig(0.0, np.zeros(shape.total_levels)),
        ratios=ratios, noise_seed=0,
    )


def _degree_dist(deg, direction):
    ks, cs = np.unique(deg, return_counts=True)
    return DegreeDistribution(
        direction=direction,
        counts={int(k): int(c) for k, c in zip(ks, cs)},
        n_nodes=int(deg.size),
    )


def _bipartite_config(csv_path, noise, seed):
    return PipelineConfig(
        input_csv=str(csv_path),
        partites=(
            PartiteRule(name="user", key_columns=("user_id",)),
            PartiteRule(name="merchant", key_columns=("merchant_id",)),
        ),
        edge_types=(("user", "merchant"),),
        column_kinds={"amount": "continuous", "category": "categorical"},
        noise_strength=noise,
        seed=seed,
    )


def _make_surrogate_csv(path, n_rows=62_000, seed=42):
    """Transaction log with skewed degrees on both sides, merchant-tier
    categories, and amounts tied to both category and user popularity."""
    rng = np.random.default_rng(seed)
    n_users, n_merchants = 3000, 2000
    u_pop = (np.arange(n_users) + 1.0) ** -1.0
    m_pop = (np.arange(n_merchants) + 1.0) ** -1.0
    users = rng.choice(n_users, size=n_rows, p=u_pop / u_pop.sum())
    merchants = rng.choice(n_merchants, size=n_rows, p=m_pop / m_pop.sum())
    cat_code = np.where(merchants < 200, 0, np.where(merchants < 1000, 1, 2))
    base = np.array([15.0, 60.0, 140.0])[cat_code]
    amount = base * (1.0 + 0.5 / np.sqrt(users + 1.0)) + rng.normal(0, 5.0, n_rows)
    category = np.array(["food", "travel", "retail"])[cat_code]
    pd.DataFrame({
        "user_id": [f"u{u}" for u in users],
        "merchant_id": [f"m{m}" for m in merchants],
        "amount": amount,
        "category": category,
    }).to_csv(path, index=False)


def _make_small_csv(path, n_rows=1200, seed=3):
    rng = np.random.default_rng(seed)
    n_users, n_merchants = 96, 80
    u_pop = (np.arange(n_users) + 1.0) ** -0.9
    m_pop = (np.arange(n_merchants) + 1.0) ** -0.9
    users = rng.choice(n_users, size=n_rows, p=u_pop / u_pop.sum())
    merchants = rng.choice(n_merchants, size=n_rows, p=m_pop / m_pop.sum())
    amount = 10.0 * (merchants % 3 + 1) + rng.normal(0, 1.5, n_rows)
    category = np.array(["food", "travel", "retail"])[merchants % 3]
    pd.DataFrame({
        "user_id": [f"u{u}" for u in users],
        "merchant_id": [f"m{m}" for m in merchants],
        "amount": amount,
        "category": category,
    }).to_csv(path, index=False)


def _read_manifest_without_timings(path):
    with open(os.path.join(path, "manifest.json")) as fh:
        data = json.load(fh)
    data.pop("timings", None)
    return data


def _assert_dirs_match(dir_a, dir_b):
    """Every file byte-identical, except manifests compare minus timings."""
    files_a = sorted(os.listdir(dir_a))
    files_b = sorted(os.listdir(dir_b))
    assert files_a == files_b
    for name in files_a:
        if name == "manifest.json":
            assert _read_manifest_without_timings(dir_a) == _read_manifest_without_timings(dir_b)
        else:
            assert filecmp.cmp(
                os.path.join(dir_a, name), os.path.join(dir_b, name), shallow=False
            ), f"{name} differs between {dir_a} and {dir_b}"


@pytest.fixture(scope="module")
def desk_scale(tmp_path_factory):
    """Full fit/generate/baseline/evaluate pass on the 62k-row surrogate."""
    root = tmp_path_factory.mktemp("desk")
    t0 = time.perf_counter()
    csv_path = root / "toy.csv"
    _make_surrogate_csv(csv_path)
    config = _bipartite_config(csv_path, noise=0.05, seed=17)
    cmd_fit(config, str(root / "bundle"), export_real=str(root / "real"))
    cmd_generate(str(root / "bundle"), 1.0, 5, str(root / "synth"))
    cmd_baseline(config, str(root / "base"))
    ours = cmd_evaluate(str(root / "real"), str(root / "synth"), str(root / "rep_ours"))
    base = cmd_evaluate(str(root / "real"), str(root / "base"), str(root / "rep_base"))
    return {
        "root": root,
        "ours": ours,
        "base": base,
        "elapsed": time.perf_counter() - t0,
    }


@pytest.fixture(scope="module")
def small_ws(tmp_path_factory):
    """A quick fitted bundle plus exported real dataset."""
    root = tmp_path_factory.mktemp("small")
    csv_path = root / "toy.csv"
    _make_small_csv(csv_path)
    config = _bipartite_config(csv_path, noise=0.05, seed=11)
    bundle = cmd_fit(config, str(root / "bundle"), export_real=str(root / "real"))
    return {
        "root": root,
        "bundle": bundle,
        "bundle_dir": str(root / "bundle"),
        "real_dir": str(root / "real"),
    }


@pytest.mark.criterion(1, "sampled cell frequencies match the explicit product matrix")
def test_sampler_matches_explicit_cell_probabilities():
    """One million draws per case; the oracle materializes the full cell
    probability matrix by repeated tensor product and a chi-square test
    compares it against empirical frequencies."""
    t0 = time.perf_counter()
    n_draws = 1_000_000
    for levels in (2, 3):
        for sv in ((0.25, 0.25, 0.25, 0.25), (0.57, 0.19, 0.19, 0.05)):
            model = _model(SeedMatrix(*sv), 2 ** levels, 2 ** levels, 0)
            rng = np.random.default_rng(7)
            rows, cols = draw_cells(model, n_draws, rng)
            theta = np.array(sv).reshape(2, 2)
            probs = theta.copy()
            for _ in range(levels - 1):
                probs = np.kron(probs, theta)
            observed = np.bincount(
                rows * model.shape.n_cols + cols, minlength=4 ** levels
            )
            result = chisquare(observed, n_draws * probs.reshape(-1))
            assert result.pvalue > 0.01, (levels, sv, result.pvalue)
    assert time.perf_counter() - t0 < 30.0


@pytest.mark.criterion(2, "closed-form degree counts match Monte Carlo within 5%")
def test_closed_form_degree_counts_match_monte_carlo():
    """Product-form seeds make row and column bits independent, so the
    closed form applies exactly; 1000 replicate graphs per configuration
    give the Monte Carlo reference for both degree directions."""
    t0 = time.perf_counter()
    n_edges, reps, levels = 2000, 1000, 8
    checked_bins = 0
    for p, q in itertools.product((0.5, 0.75), repeat=2):
        seed = SeedMatrix(p * q, p * (1 - q), (1 - p) * q, (1 - p) * (1 - q))
        model = _model(seed, 2 ** levels, 2 ** levels, 0)
        acc_out = np.zeros(n_edges + 1)
        acc_in = np.zeros(n_edges + 1)
        rng = np.random.default_rng(5)
        for _ in range(reps):
            rows, cols = draw_cells(model, n_edges, rng)
            deg_out = np.bincount(rows, minlength=model.shape.n_rows)
            deg_in = np.bincount(cols, minlength=model.shape.n_cols)
            acc_out += np.bincount(deg_out, minlength=n_edges + 1)[: n_edges + 1]
            acc_in += np.bincount(deg_in, minlength=n_edges + 1)[: n_edges + 1]
        for acc, marginal, predict in (
            (acc_out, p, expected_out_degree_counts),
            (acc_in, q, expected_in_degree_counts),
        ):
            mc = acc / reps
            k_max = int(np.nonzero(mc)[0].max())
            predicted = predict(marginal, levels, n_edges, k_max)
            mask = predicted >= 30.0
            assert mask.any()
            rel = np.abs(mc[: k_max + 1][mask] - predicted[mask]) / predicted[mask]
            assert rel.max() < 0.05, (p, q, rel.max())
            checked_bins += int(mask.sum())
    assert checked_bins >= 8
    assert time.perf_counter() - t0 < 120.0


@pytest.mark.criterion(3, "planted seed parameters recovered from a sampled graph")
def test_planted_seed_recovery():
    t0 = time.perf_counter()
    model = _model(SKEWED_SEED, 2 ** 14, 2 ** 14, 100_000, ratios=(3.0, 3.0))
    edges = sample_edges(model, rng_seed=9, workers=1)
    deg_out = np.bincount(edges[:, 0], minlength=model.shape.n_rows)
    deg_in = np.bincount(edges[:, 1], minlength=model.shape.n_cols)
    ratios = mle_quadrant_ratios(edges, model.shape)
    recovered = fit_seed(
        _degree_dist(deg_out, "out"),
        _degree_dist(deg_in, "in"),
        model.shape,
        edges.shape[0],
        ratios,
        {},
        bit_fractions=quadrant_bit_fractions(edges, model.shape),
    )
    assert abs(recovered.p - 0.76) <= 0.02
    assert abs(recovered.q - 0.76) <= 0.02
    assert abs(ratios[0] - 3.0) <= 0.30
    assert abs(ratios[1] - 3.0) <= 0.30
    assert time.perf_counter() - t0 < 60.0


@pytest.mark.criterion(4, "zero noise is exact; noisy seeds stay valid distributions")
def test_noise_exactness_and_validity():
    # zero strength must reproduce the noiseless cascade bit for bit
    shape = plan_shape(2 ** 6, 2 ** 5)
    zero_noise = sample_noise(SKEWED_SEED, 0.0, shape.total_levels, noise_seed=99)
    assert not zero_noise.level_noise.any()
    noisy_model = SeedModel(
        seed=SKEWED_SEED, shape=shape, e_target=500,
        noise=zero_noise, ratios=(3.0, 3.0), noise_seed=99,
    )
    plain_model = _model(SKEWED_SEED, 2 ** 6, 2 ** 5, 500, ratios=(3.0, 3.0))
    assert level_parameters(noisy_model) == level_parameters(plain_model)
    assert perturbed_seed(SKEWED_SEED, 0.0) == SKEWED_SEED
    rows_a, cols_a = draw_cells(noisy_model, 5000, np.random.default_rng(1))
    rows_b, cols_b = draw_cells(plain_model, 5000, np.random.default_rng(1))
    assert np.array_equal(rows_a, rows_b) and np.array_equal(cols_a, cols_b)

    # positive strength: every perturbed seed is a zero-sum-shifted
    # probability distribution and every drawn scalar respects its bound
    rng = np.random.default_rng(0)
    for i in range(10_000):
        raw = rng.uniform(0.05, 1.0, 4)
        raw /= raw.sum()
        seed = SeedMatrix(*raw)
        strength = float(rng.uniform(0.0, 1.0))
        levels = int(rng.integers(1, 13))
        noise = sample_noise(seed, strength, levels, noise_seed=i)
        assert noise.level_noise.shape == (levels,)
        assert np.all(noise.level_noise >= 0.0)
        assert np.all(noise.level_noise <= strength * noise_bound(seed) + 1e-15)
        n_f = float(noise.level_noise[-1])
        shifted = perturbed_seed(seed, n_f)
        parts = (shifted.a, shifted.b, shifted.c, shifted.d)
        assert min(parts) >= 0.0
        assert abs(sum(parts) - raw.sum()) < 1e-12
        assert abs((shifted.b - seed.b) - n_f) < 1e-12
        assert abs((shifted.c - seed.c) - n_f) < 1e-12
        assert abs((shifted.a - seed.a) + (shifted.d - seed.d) + 2.0 * n_f) < 1e-12


@pytest.mark.criterion(5, "density preserved across scales 1, 4, and 64")
def test_density_preserved_across_scales(small_ws, tmp_path):
    """Scaling by S grows each side by sqrt(S) and the edge count by S;
    at S=64 that is exactly 3 extra levels per dimension and 8x nodes."""
    bundle = small_ws["bundle"]
    fitted_density = bundle.real_summary["edge_types"][0]["density"]
    real_sizes = {p["name"]: p["size"] for p in bundle.real_summary["partites"]}
    for scale in (1, 4, 64):
        out = tmp_path / f"s{scale}"
        cmd_generate(small_ws["bundle_dir"], float(scale), 9, str(out))
        manifest = _read_manifest_without_timings(str(out))
        density = manifest["edge_types"][0]["density"]
        assert abs(density - fitted_density) <= 0.01 * fitted_density, scale
    sizes_64 = {p["name"]: p["size"] for p in manifest["partites"]}
    assert sizes_64 == {name: 8 * size for name, size in real_sizes.items()}

    original = bundle.seed_models[0]
    scaled = scale_model(original, 64.0)
    assert scaled.shape.n == original.shape.n + 3
    assert scaled.shape.m == original.shape.m + 3
    assert scaled.e_target == 64 * original.e_target


@pytest.mark.criterion(6, "self-evaluation returns exact identity scores")
def test_self_evaluation_identities(small_ws, tmp_path):
    scores = cmd_evaluate(small_ws["real_dir"], small_ws["real_dir"], str(tmp_path / "rep"))
    assert scores["degree_dist_score"] == 1.0
    assert scores["feature_corr_score"] == 1.0
    assert scores["degree_feature_js"] == 0.0

    rng = np.random.default_rng(4242)
    for _ in range(100):
        ks = np.unique(rng.integers(1, 64, size=int(rng.integers(1, 9))))
        cs = rng.integers(1, 100, size=ks.size)
        dist = DegreeDistribution(
            direction="out",
            counts={int(k): int(c) for k, c in zip(ks, cs)},
            n_nodes=int(cs.sum() + rng.integers(0, 10)),
        )
        assert dcc(dist, dist) == 0.0

        size = int(rng.integers(2, 40))
        pvec = rng.random(size)
        pvec /= pvec.sum()
        qvec = rng.random(size)
        qvec /= qvec.sum()
        forward = js_divergence(pvec, qvec)
        assert abs(forward - js_divergence(qvec, pvec)) < 1e-12
        assert 0.0 <= forward <= 1.0 + 1e-12


@pytest.mark.criterion(7, "full pipeline beats the uniform baseline on all three scores")
def test_pipeline_beats_uniform_baseline(desk_scale):
    """Strict ordering against an ER-structure, independent-feature,
    random-alignment baseline fitted to the same real input."""
    ours, base = desk_scale["ours"], desk_scale["base"]
    assert ours["degree_dist_score"] > base["degree_dist_score"]
    assert ours["feature_corr_score"] > base["feature_corr_score"]
    assert ours["degree_feature_js"] < base["degree_feature_js"]
    assert desk_scale["elapsed"] < 600.0


@pytest.mark.criterion(8, "ranked alignment beats random alignment on joint divergence")
def test_ranked_alignment_beats_random(tmp_path):
    """Feature planted as a monotone function of both endpoint degrees;
    with identical structure and identical feature values, only the
    assignment differs between the two modes."""
    shape = plan_shape(2 ** 10, 2 ** 10)
    planted = SeedModel(
        seed=SeedMatrix(0.45, 0.25, 0.20, 0.10), shape=shape, e_target=30_000,
        noise=NoiseConfig(0.0, np.zeros(shape.total_levels)),
        ratios=(1.8, 2.25), noise_seed=0,
    )
    edges = sample_edges(planted, rng_seed=21, workers=1)
    deg_out = np.bincount(edges[:, 0], minlength=shape.n_rows)
    deg_in = np.bincount(edges[:, 1], minlength=shape.n_cols)
    rng = np.random.default_rng(33)
    amount = (
        np.log1p(deg_out[edges[:, 0]])
        + np.log1p(deg_in[edges[:, 1]])
        + rng.normal(0, 0.05, edges.shape[0])
    )
    csv_path = tmp_path / "planted.csv"
    pd.DataFrame({
        "user_id": [f"u{u}" for u in edges[:, 0]],
        "merchant_id": [f"m{m}" for m in edges[:, 1]],
        "amount": amount,
    }).to_csv(csv_path, index=False)

    config = PipelineConfig(
        input_csv=str(csv_path),
        partites=(
            PartiteRule(name="user", key_columns=("user_id",)),
            PartiteRule(name="merchant", key_columns=("merchant_id",)),
        ),
        edge_types=(("user", "merchant"),),
        column_kinds={"amount": "continuous"},
        noise_strength=0.0,
        seed=13,
    )
    cmd_fit(config, str(tmp_path / "bundle"), export_real=str(tmp_path / "real"))
    bundle = load_bundle(str(tmp_path / "bundle"))
    real, _ = load_dataset(str(tmp_path / "real"))
    ranked = generate_graph(bundle, 1.0, 5, workers=1, aligner_mode="ranked")
    randomized = generate_graph(bundle, 1.0, 5, workers=1, aligner_mode="random")

    assert all(np.array_equal(a, b) for a, b in zip(ranked.edges, randomized.edges))
    assert np.array_equal(
        np.sort(ranked.edge_features[0].column("amount")),
        np.sort(randomized.edge_features[0].column("amount")),
    )
    assert degree_feature_js(real, ranked) < degree_feature_js(real, randomized)


@pytest.mark.criterion(9, "rank matching equals the optimal squared-error assignment")
def test_rank_matching_equals_optimal_assignment():
    rng = np.random.default_rng(6)

    def cost(pred, vals, assignment):
        return float(np.sum((pred - vals[np.asarray(assignment)]) ** 2))

    # exhaustive search over every permutation
    for _ in range(60):
        n = int(rng.integers(2, 8))
        pred = rng.normal(size=n)
        vals = rng.normal(size=n)
        table = FeatureTable((ColumnSpec("x", "continuous"),), (vals,))
        got = rank_match({"x": pred}, table, table.schema)
        best = min(itertools.permutations(range(n)), key=lambda a: cost(pred, vals, a))
        assert abs(cost(pred, vals, got) - cost(pred, vals, best)) < 1e-9

    # optimal-assignment solver carries the oracle up to ten edges
    for n in (8, 9, 10):
        for _ in range(10):
            pred = rng.normal(size=n)
            vals = rng.normal(size=n)
            table = FeatureTable((ColumnSpec("x", "continuous"),), (vals,))
            got = rank_match({"x": pred}, table, table.schema)
            matrix = (pred[:, None] - vals[None, :]) ** 2
            _, optimal = linear_sum_assignment(matrix)
            assert np.array_equal(got, optimal)


@pytest.mark.criterion(10, "fixed seeds give byte-identical outputs; bundles round-trip")
def test_determinism_and_bundle_roundtrip(tmp_path):
    csv_path = tmp_path / "toy.csv"
    _make_small_csv(csv_path)
    config = _bipartite_config(csv_path, noise=0.05, seed=11)

    bundle = cmd_fit(config, str(tmp_path / "b1"))
    cmd_fit(config, str(tmp_path / "b2"))
    _assert_dirs_match(str(tmp_path / "b1"), str(tmp_path / "b2"))

    cmd_generate(str(tmp_path / "b1"), 1.0, 5, str(tmp_path / "g1"), workers=2)
    cmd_generate(str(tmp_path / "b1"), 1.0, 5, str(tmp_path / "g2"), workers=2)
    _assert_dirs_match(str(tmp_path / "g1"), str(tmp_path / "g2"))

    # generating from the reloaded bundle must equal the in-memory model
    from_memory = generate_graph(bundle, 1.0, 5, workers=2)
    from_disk = generate_graph(load_bundle(str(tmp_path / "b1")), 1.0, 5, workers=2)
    write_dataset(from_memory, str(tmp_path / "r1"), config.column_kinds, seed=5, scale=1.0)
    write_dataset(from_disk, str(tmp_path / "r2"), config.column_kinds, seed=5, scale=1.0)
    _assert_dirs_match(str(tmp_path / "r1"), str(tmp_path / "r2"))


@pytest.mark.criterion(11, "ten million edges generated within the time budget")
def test_ten_million_edges_within_time_budget(tmp_path):
    """Structure plus feature sampling with alignment disabled, under
    60 seconds, plus a worker-count throughput curve written as CSV."""
    model = _model(SKEWED_SEED, 2 ** 13, 2 ** 13, 10_000_000, ratios=(3.0, 3.0))
    fit_rng = np.random.default_rng(8)
    table = FeatureTable(
        (
            ColumnSpec("amount", "continuous"),
            ColumnSpec("category", "categorical", ("a", "b", "c")),
        ),
        (
            fit_rng.normal(50.0, 12.0, 5000),
            fit_rng.integers(0, 3, 5000).astype(np.int64),
        ),
    )
    feature_model = fit_feature_model(table, seed=0)

    t0 = time.perf_counter()
    edges = sample_edges(model, rng_seed=1, workers=8)
    features = sample_features(feature_model, edges.shape[0], rng_seed=1, workers=8)
    elapsed = time.perf_counter() - t0

    assert edges.shape == (10_000_000, 2)
    assert int(edges.max()) < 2 ** 13
    assert features.columns[0].shape[0] == 10_000_000
    assert elapsed < 60.0, f"generation took {elapsed:.1f}s"

    curve_path = tmp_path / "throughput_scaling.csv"
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["workers", "edges", "seconds", "edges_per_second"])
        for workers in (1, 2, 4, 8):
            smaller = replace(model, e_target=2_000_000)
            t1 = time.perf_counter()
            got = sample_edges(smaller, rng_seed=1, workers=workers)
            dt = time.perf_counter() - t1
            writer.writerow([workers, got.shape[0], f"{dt:.3f}", f"{got.shape[0] / dt:.0f}"])
    with open(curve_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 5
    assert all(float(row[3]) > 0 for row in rows[1:])

"""Time edge and feature sampling across worker-stream counts.

Writes one CSV row per (workers, edges) cell. Worker streams are
deterministic RNG partitions, so the curve measures stream-splitting
overhead on this machine rather than parallel speedup when only one
core is available.
"""

import argparse
import csv
import time

import numpy as np

from synthgraph.featgen import fit_feature_model, sample_features
from synthgraph.graph import ColumnSpec, FeatureTable
from synthgraph.structgen import (
    NoiseConfig,
    SeedMatrix,
    SeedModel,
    plan_shape,
    sample_edges,
)


def build_model(levels: int, n_edges: int) -> SeedModel:
    shape = plan_shape(2 ** levels, 2 ** levels)
    return SeedModel(
        seed=SeedMatrix(0.57, 0.19, 0.19, 0.05),
        shape=shape,
        e_target=n_edges,
        noise=NoiseConfig(0.0, np.zeros(shape.total_levels)),
        ratios=(3.0, 3.0),
        noise_seed=0,
    )


def build_feature_model(seed: int = 8):
    rng = np.random.default_rng(seed)
    table = FeatureTable(
        (
            ColumnSpec("amount", "continuous"),
            ColumnSpec("category", "categorical", ("a", "b", "c")),
        ),
        (
            rng.normal(50.0, 12.0, 5000),
            rng.integers(0, 3, 5000).astype(np.int64),
        ),
    )
    return fit_feature_model(table, seed=seed)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--edges", type=int, nargs="+", default=[1_000_000, 10_000_000])
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--levels", type=int, default=13)
    ap.add_argument("--features", action="store_true",
                    help="also time feature-row sampling at each size")
    ap.add_argument("--out", default="throughput_scaling.csv")
    args = ap.parse_args()

    feature_model = build_feature_model() if args.features else None
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["workers", "edges", "edge_seconds", "edges_per_second",
                         "feature_seconds"])
        for n_edges in args.edges:
            model = build_model(args.levels, n_edges)
            for workers in args.workers:
                t0 = time.perf_counter()
                got = sample_edges(model, rng_seed=1, workers=workers)
                edge_dt = time.perf_counter() - t0
                feat_dt = ""
                if feature_model is not None:
                    t1 = time.perf_counter()
                    sample_features(feature_model, got.shape[0], rng_seed=1,
                                    workers=workers)
                    feat_dt = f"{time.perf_counter() - t1:.3f}"
                writer.writerow([workers, got.shape[0], f"{edge_dt:.3f}",
                                 f"{got.shape[0] / edge_dt:.0f}", feat_dt])
                print(f"workers={workers} edges={got.shape[0]} "
                      f"edge_time={edge_dt:.2f}s feature_time={feat_dt or '-'}s")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

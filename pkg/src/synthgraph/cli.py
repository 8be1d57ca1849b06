"""Command-line entry point.

Subcommands: fit, generate, evaluate, baseline. Exit codes: 0 success,
2 configuration error, 3 data error, 4 capacity or fitting error. The
SYNTHGRAPH_WORKERS environment variable overrides the configured worker
count when no --workers flag is given.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import CapacityError, ConfigError, DataError, FitError
from .pipeline import (WORKERS_ENV_VAR, PipelineConfig, cmd_baseline,
                       cmd_evaluate, cmd_fit, cmd_generate)


def _env_workers() -> int | None:
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be >= 1")
    return value


def _resolve_workers(flag_value: int | None) -> int | None:
    return flag_value if flag_value is not None else _env_workers()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthgraph",
        description="Fit parametric graph models and generate synthetic attributed graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit models from a CSV and write a model bundle")
    p_fit.add_argument("--config", required=True, help="pipeline config JSON")
    p_fit.add_argument("--out", required=True, help="bundle output directory")
    p_fit.add_argument("--export-real", help="also export the real graph as a dataset directory")
    p_fit.add_argument("--input", help="override: input CSV path")
    p_fit.add_argument("--seed", type=int, help="override: master seed")
    p_fit.add_argument("--workers", type=int, help="override: worker count")
    p_fit.add_argument("--noise", type=float, help="override: noise strength in [0,1]")
    p_fit.add_argument("--backend", choices=("mixture", "independent"),
                       help="override: feature backend")
    p_fit.add_argument("--aligner", choices=("ranked", "random", "exhaustive", "none"),
                       help="override: aligner mode")

    p_gen = sub.add_parser("generate", help="sample a synthetic dataset from a bundle")
    p_gen.add_argument("--bundle", required=True, help="model bundle directory")
    p_gen.add_argument("--scale", type=float, default=1.0, help="scale factor S")
    p_gen.add_argument("--seed", type=int, default=0, help="generation seed")
    p_gen.add_argument("--out", required=True, help="dataset output directory")
    p_gen.add_argument("--workers", type=int, help="override: worker count")
    p_gen.add_argument("--aligner", choices=("ranked", "random", "exhaustive", "none"),
                       help="override: aligner mode")

    p_eval = sub.add_parser("evaluate", help="compare a synthetic dataset against a real one")
    p_eval.add_argument("--real", required=True, help="real dataset directory")
    p_eval.add_argument("--synthetic", required=True, help="synthetic dataset directory")
    p_eval.add_argument("--out", required=True, help="report output directory")
    p_eval.add_argument("--max-hops", type=int, default=10)
    p_eval.add_argument("--num-sources", type=int, default=256)
    p_eval.add_argument("--seed", type=int, default=0, help="hop-plot sampling seed")

    p_base = sub.add_parser("baseline", help="generate a uniform-random baseline dataset")
    p_base.add_argument("--config", required=True, help="pipeline config JSON")
    p_base.add_argument("--kind", default="er", help="baseline kind (er)")
    p_base.add_argument("--out", required=True, help="dataset output directory")
    p_base.add_argument("--seed", type=int, help="override: master seed")
    p_base.add_argument("--workers", type=int, help="override: worker count")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "fit":
        config = PipelineConfig.from_json(args.config).with_overrides(
            input_csv=args.input,
            seed=args.seed,
            workers=_resolve_workers(args.workers),
            noise_strength=args.noise,
            feature_backend=args.backend,
            aligner_mode=args.aligner,
        )
        cmd_fit(config, args.out, export_real=args.export_real)
        print(f"bundle written to {args.out}")
    elif args.command == "generate":
        cmd_generate(
            args.bundle, args.scale, args.seed, args.out,
            workers=_resolve_workers(args.workers), aligner_mode=args.aligner,
        )
        print(f"dataset written to {args.out}")
    elif args.command == "evaluate":
        scores = cmd_evaluate(
            args.real, args.synthetic, args.out,
            max_hops=args.max_hops, num_sources=args.num_sources, seed=args.seed,
        )
        for key, value in scores.items():
            print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
        print(f"report written to {args.out}")
    elif args.command == "baseline":
        config = PipelineConfig.from_json(args.config).with_overrides(
            seed=args.seed, workers=_resolve_workers(args.workers)
        )
        cmd_baseline(config, args.out, kind=args.kind)
        print(f"baseline dataset written to {args.out}")
    return 0


def main() -> None:
    try:
        sys.exit(run())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        sys.exit(2)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        sys.exit(3)
    except (CapacityError, FitError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        sys.exit(4)


if __name__ == "__main__":
    main()

"""End-to-end orchestration: fit, generate, evaluate, baseline.

A fit produces a model bundle directory (manifest, one structural model
per edge type, feature model, aligner model, real-data summaries); a
generate consumes a bundle and writes a dataset directory (manifest,
node and edge CSVs). Both artifacts are plain JSON/CSV/npz so they can
be inspected and diffed.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .aligner import (AlignerModel, ColumnEnsemble, align, edge_inputs, fit_aligner)
from .boosting import BoostedTreesRegressor, Tree
from .errors import CapacityError, ConfigError, DataError
from .featgen import (ContinuousNormalizer, EmbeddingSpec, FeatureModel,
                      fit_feature_model, sample_features)
from .graph import (ColumnSpec, ConstructionRules, FeatureTable, PartiteGraph,
                    PartiteRule, build_graph_from_table, degree_distribution)
from .metrics import association_matrix, compute_report
from .structgen import (NoiseConfig, SeedMatrix, SeedModel, ShapePlan,
                        fit_seed, mle_quadrant_ratios, plan_shape,
                        quadrant_bit_fractions, sample_edges, sample_noise,
                        scale_model)
from .structural import structural_features

FORMAT_VERSION = 1
WORKERS_ENV_VAR = "SYNTHGRAPH_WORKERS"

VALID_BACKENDS = ("mixture", "independent")
VALID_ALIGNERS = ("ranked", "random", "exhaustive", "none")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a fit run needs, loadable from a single JSON file."""

    input_csv: str
    partites: tuple  # of PartiteRule
    edge_types: tuple  # of (src, dst)
    column_kinds: dict = field(default_factory=dict)
    feature_backend: str = "mixture"
    aligner_mode: str = "ranked"
    noise_strength: float = 0.1
    scale: float = 1.0
    seed: int = 0
    workers: int = 1
    num_sources: int = 256
    max_hops: int = 10

    def __post_init__(self):
        if not self.input_csv:
            raise ConfigError("input_csv is required")
        if len(self.partites) < 2:
            raise ConfigError("at least two partites are required")
        names = {p.name for p in self.partites}
        if len(names) != len(self.partites):
            raise ConfigError("partite names must be unique")
        if not self.edge_types:
            raise ConfigError("at least one edge type is required")
        for src, dst in self.edge_types:
            if src not in names or dst not in names:
                raise ConfigError(f"edge type ({src!r}, {dst!r}) references unknown partite")
        for col, kind in self.column_kinds.items():
            if kind not in ("continuous", "categorical"):
                raise ConfigError(f"column {col!r} has unknown kind {kind!r}")
        if self.feature_backend not in VALID_BACKENDS:
            raise ConfigError(f"feature_backend must be one of {VALID_BACKENDS}")
        if self.aligner_mode not in VALID_ALIGNERS:
            raise ConfigError(f"aligner_mode must be one of {VALID_ALIGNERS}")
        if not 0.0 <= self.noise_strength <= 1.0:
            raise ConfigError("noise_strength must lie in [0, 1]")
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "input_csv": self.input_csv,
            "partites": [
                {"name": p.name, "key_columns": list(p.key_columns)} for p in self.partites
            ],
            "edge_types": [list(et) for et in self.edge_types],
            "column_kinds": dict(self.column_kinds),
            "feature_backend": self.feature_backend,
            "aligner_mode": self.aligner_mode,
            "noise_strength": self.noise_strength,
            "scale": self.scale,
            "seed": self.seed,
            "workers": self.workers,
            "num_sources": self.num_sources,
            "max_hops": self.max_hops,
        }

    @staticmethod
    def from_dict(raw: dict) -> "PipelineConfig":
        known = {
            "input_csv", "partites", "edge_types", "column_kinds",
            "feature_backend", "aligner_mode", "noise_strength", "scale",
            "seed", "workers", "num_sources", "max_hops",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            partites = tuple(
                PartiteRule(name=p["name"], key_columns=tuple(p["key_columns"]))
                for p in raw["partites"]
            )
            edge_types = tuple(tuple(et) for et in raw.get("edge_types", ()))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed partite/edge_type entry: {exc}")
        kwargs = {k: raw[k] for k in known - {"partites", "edge_types"} if k in raw}
        try:
            return PipelineConfig(partites=partites, edge_types=edge_types, **kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc))

    @staticmethod
    def from_json(path: str) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        return PipelineConfig.from_dict(raw)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **overrides) if overrides else self


@dataclass(eq=False)
class ModelBundle:
    """In-memory form of a fitted bundle directory."""

    config: PipelineConfig
    seed_models: list
    feature_models: list
    aligner_models: list
    fit_report: dict
    real_summary: dict


def _stream_seed(seed: int, index: int) -> int:
    """Disjoint RNG base seeds for per-edge-type sampling streams."""
    return seed * 1_000_003 + index


@contextmanager
def _fresh_dir(path: str):
    """Build outputs in a temp dir, move into place only on success."""
    path = os.path.abspath(path)
    if os.path.exists(path):
        raise DataError(f"output directory already exists: {path}")
    parent = os.path.dirname(path) or "."
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".partial-", dir=parent)
    try:
        yield tmp
        os.replace(tmp, path)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _edge_type_tag(edge_type: tuple) -> str:
    return f"{edge_type[0]}__{edge_type[1]}"


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"missing file: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt JSON in {path}: {exc}")


def _schema_to_json(schema: tuple) -> list:
    return [
        {
            "name": s.name,
            "kind": s.kind,
            "vocabulary": list(s.vocabulary) if s.vocabulary else None,
        }
        for s in schema
    ]


def _schema_from_json(raw: list) -> tuple:
    return tuple(
        ColumnSpec(
            name=s["name"],
            kind=s["kind"],
            vocabulary=tuple(s["vocabulary"]) if s.get("vocabulary") else None,
        )
        for s in raw
    )


def save_seed_model(model: SeedModel, path: str) -> None:
    _write_json(path, {
        "a": model.seed.a, "b": model.seed.b, "c": model.seed.c, "d": model.seed.d,
        "n": model.shape.n, "m": model.shape.m,
        "n_rows": model.shape.n_rows, "n_cols": model.shape.n_cols,
        "e_target": model.e_target,
        "ratio_ab": model.ratios[0], "ratio_ac": model.ratios[1],
        "noise_strength": model.noise.noise_strength,
        "level_noise": model.noise.level_noise.tolist(),
        "noise_seed": model.noise_seed,
    })


def load_seed_model(path: str) -> SeedModel:
    raw = _read_json(path)
    return SeedModel(
        seed=SeedMatrix(raw["a"], raw["b"], raw["c"], raw["d"]),
        shape=ShapePlan(n=raw["n"], m=raw["m"], n_rows=raw["n_rows"], n_cols=raw["n_cols"]),
        e_target=raw["e_target"],
        noise=NoiseConfig(
            noise_strength=raw["noise_strength"],
            level_noise=np.asarray(raw["level_noise"], dtype=np.float64),
        ),
        ratios=(raw["ratio_ab"], raw["ratio_ac"]),
        noise_seed=raw["noise_seed"],
    )


def save_feature_model(model: FeatureModel, json_path: str, npz_path: str) -> None:
    _write_json(json_path, {
        "schema": _schema_to_json(model.schema),
        "backend": model.backend,
        "bic_table": {str(k): v for k, v in model.bic_table.items()},
        "embeddings": {
            name: {"vocab_size": e.vocab_size, "width": e.width}
            for name, e in model.embeddings.items()
        },
    })
    arrays = {
        "weights": model.weights,
        "means": model.means,
        "variances": model.variances,
    }
    for name, nrm in model.normalizers.items():
        arrays[f"nrm/{name}/weights"] = nrm.weights
        arrays[f"nrm/{name}/means"] = nrm.means
        arrays[f"nrm/{name}/variances"] = nrm.variances
    for key, table in model.cat_tables.items():
        arrays[f"cat/{key}"] = table
    np.savez(npz_path, **arrays)


def load_feature_model(json_path: str, npz_path: str) -> FeatureModel:
    meta = _read_json(json_path)
    schema = _schema_from_json(meta["schema"])
    with np.load(npz_path) as data:
        normalizers = {}
        cat_tables = {}
        for key in data.files:
            if key.startswith("nrm/") and key.endswith("/weights"):
                name = key[len("nrm/"):-len("/weights")]
                normalizers[name] = ContinuousNormalizer(
                    weights=data[f"nrm/{name}/weights"],
                    means=data[f"nrm/{name}/means"],
                    variances=data[f"nrm/{name}/variances"],
                )
            elif key.startswith("cat/"):
                cat_tables[key[len("cat/"):]] = data[key]
        model = FeatureModel(
            schema=schema,
            backend=meta["backend"],
            normalizers=normalizers,
            weights=data["weights"],
            means=data["means"],
            variances=data["variances"],
            cat_tables=cat_tables,
            embeddings={
                name: EmbeddingSpec(e["vocab_size"], e["width"])
                for name, e in meta["embeddings"].items()
            },
            bic_table={int(k): v for k, v in meta["bic_table"].items()},
        )
    return model


def _flatten_trees(reg: BoostedTreesRegressor) -> dict:
    offsets = np.cumsum([0] + [len(t.feature) for t in reg.trees_])
    out = {
        "offsets": offsets.astype(np.int64),
        "base": np.array([reg.base_score_]),
        "n_edges": np.array([len(reg.bin_edges_)], dtype=np.int64),
    }
    for part in ("feature", "threshold", "left", "right", "value"):
        out[part] = (
            np.concatenate([getattr(t, part) for t in reg.trees_])
            if reg.trees_ else np.zeros(0)
        )
    for j, edges in enumerate(reg.bin_edges_):
        out[f"edges/{j}"] = edges
    return out


def _unflatten_trees(arrays: dict) -> BoostedTreesRegressor:
    reg = BoostedTreesRegressor()
    reg.base_score_ = float(arrays["base"][0])
    reg.bin_edges_ = [arrays[f"edges/{j}"] for j in range(int(arrays["n_edges"][0]))]
    offsets = arrays["offsets"]
    reg.trees_ = []
    for t in range(len(offsets) - 1):
        lo, hi = offsets[t], offsets[t + 1]
        reg.trees_.append(Tree(
            feature=arrays["feature"][lo:hi].astype(np.int32),
            threshold=arrays["threshold"][lo:hi].astype(np.int32),
            left=arrays["left"][lo:hi].astype(np.int32),
            right=arrays["right"][lo:hi].astype(np.int32),
            value=arrays["value"][lo:hi].astype(np.float64),
        ))
    return reg


def save_aligner_model(model: AlignerModel, json_path: str, npz_path: str) -> None:
    _write_json(json_path, {
        "schema": _schema_to_json(model.schema),
        "feature_width": model.feature_width,
    })
    arrays = {}
    for spec in model.schema:
        ens = model.ensembles[spec.name]
        for i, reg in enumerate(ens.models):
            for key, arr in _flatten_trees(reg).items():
                arrays[f"{spec.name}/{i}/{key}"] = arr
    np.savez(npz_path, **arrays)


def load_aligner_model(json_path: str, npz_path: str) -> AlignerModel:
    meta = _read_json(json_path)
    schema = _schema_from_json(meta["schema"])
    ensembles = {}
    with np.load(npz_path) as data:
        grouped: dict = {}
        for key in data.files:
            col, idx, part = key.split("/", 2)
            grouped.setdefault(col, {}).setdefault(int(idx), {})[part] = data[key]
        for spec in schema:
            models = tuple(
                _unflatten_trees(grouped[spec.name][i])
                for i in range(len(grouped[spec.name]))
            )
            ensembles[spec.name] = ColumnEnsemble(kind=spec.kind, models=models)
    return AlignerModel(
        schema=schema, feature_width=meta["feature_width"], ensembles=ensembles
    )


def save_bundle(bundle: ModelBundle, out_dir: str, timings: dict | None = None) -> None:
    with _fresh_dir(out_dir) as tmp:
        tags = [_edge_type_tag(et) for et in bundle.config.edge_types]
        for i, tag in enumerate(tags):
            save_seed_model(bundle.seed_models[i], os.path.join(tmp, f"seed_model_{i}_{tag}.json"))
            save_feature_model(
                bundle.feature_models[i],
                os.path.join(tmp, f"feature_model_{i}_{tag}.json"),
                os.path.join(tmp, f"feature_model_{i}_{tag}.npz"),
            )
            if bundle.aligner_models[i] is not None:
                save_aligner_model(
                    bundle.aligner_models[i],
                    os.path.join(tmp, f"aligner_model_{i}_{tag}.json"),
                    os.path.join(tmp, f"aligner_model_{i}_{tag}.npz"),
                )
        _write_json(os.path.join(tmp, "manifest.json"), {
            "format_version": FORMAT_VERSION,
            "kind": "model_bundle",
            "config": bundle.config.to_dict(),
            "fit_report": bundle.fit_report,
            "real_summary": bundle.real_summary,
            "timings": timings or {},
        })


def load_bundle(bundle_dir: str) -> ModelBundle:
    manifest = _read_json(os.path.join(bundle_dir, "manifest.json"))
    if manifest.get("kind") != "model_bundle":
        raise DataError(f"{bundle_dir} is not a model bundle")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported bundle format {manifest.get('format_version')}")
    config = PipelineConfig.from_dict(manifest["config"])
    seed_models, feature_models, aligner_models = [], [], []
    for i, et in enumerate(config.edge_types):
        tag = _edge_type_tag(et)
        seed_models.append(load_seed_model(os.path.join(bundle_dir, f"seed_model_{i}_{tag}.json")))
        feature_models.append(load_feature_model(
            os.path.join(bundle_dir, f"feature_model_{i}_{tag}.json"),
            os.path.join(bundle_dir, f"feature_model_{i}_{tag}.npz"),
        ))
        aligner_json = os.path.join(bundle_dir, f"aligner_model_{i}_{tag}.json")
        if os.path.exists(aligner_json):
            aligner_models.append(load_aligner_model(
                aligner_json, os.path.join(bundle_dir, f"aligner_model_{i}_{tag}.npz")
            ))
        else:
            aligner_models.append(None)
    return ModelBundle(
        config=config,
        seed_models=seed_models,
        feature_models=feature_models,
        aligner_models=aligner_models,
        fit_report=manifest["fit_report"],
        real_summary=manifest["real_summary"],
    )


def _read_input_table(config: PipelineConfig) -> pd.DataFrame:
    try:
        frame = pd.read_csv(config.input_csv)
    except FileNotFoundError:
        raise DataError(f"input CSV not found: {config.input_csv}")
    except pd.errors.ParserError as exc:
        raise DataError(f"input CSV is malformed: {exc}")
    if frame.shape[0] == 0:
        raise DataError("input CSV has no rows")
    missing = [
        col
        for p in config.partites
        for col in p.key_columns
        if col not in frame.columns
    ] + [col for col in config.column_kinds if col not in frame.columns]
    if missing:
        raise ConfigError(f"config references missing column(s): {sorted(set(missing))}")
    return frame


def build_real_graph(config: PipelineConfig) -> PartiteGraph:
    frame = _read_input_table(config)
    rules = ConstructionRules(partites=config.partites, edge_types=config.edge_types)
    return build_graph_from_table(frame, rules, config.column_kinds or None)


def _real_summary(graph: PartiteGraph) -> dict:
    summary = {
        "partites": [{"name": n, "size": s} for n, s in graph.partites],
        "edge_types": [],
    }
    for i, et in enumerate(graph.edge_types):
        arr = graph.edges[i]
        entry = {
            "src": et[0],
            "dst": et[1],
            "n_edges": int(arr.shape[0]),
            "density": arr.shape[0] / (graph.partite_size(et[0]) * graph.partite_size(et[1])),
            "degree_counts_out": {
                str(k): v for k, v in degree_distribution(graph, i, "out").counts.items()
            },
            "degree_counts_in": {
                str(k): v for k, v in degree_distribution(graph, i, "in").counts.items()
            },
        }
        table = graph.edge_features[i]
        if table is not None and len(table.schema) >= 1:
            entry["association_columns"] = table.column_names
            entry["association_matrix"] = association_matrix(table).tolist()
        summary["edge_types"].append(entry)
    return summary


def cmd_fit(config: PipelineConfig, out_dir: str, export_real: str | None = None) -> ModelBundle:
    """Fit all models and write the bundle; optionally export the real
    graph as a dataset directory for later evaluation."""
    timings = {}
    t0 = time.perf_counter()
    graph = build_real_graph(config)
    timings["ingest"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    seed_models = []
    fit_report = {}
    for i, et in enumerate(config.edge_types):
        arr = graph.edges[i]
        if arr.shape[0] == 0:
            raise DataError(f"edge type {_edge_type_tag(et)} has no edges")
        shape = plan_shape(graph.partite_size(et[0]), graph.partite_size(et[1]))
        ratios = mle_quadrant_ratios(arr, shape)
        report = {}
        seed = fit_seed(
            degree_distribution(graph, i, "out"),
            degree_distribution(graph, i, "in"),
            shape, arr.shape[0], ratios, report,
            bit_fractions=quadrant_bit_fractions(arr, shape),
        )
        noise = sample_noise(
            seed, config.noise_strength, shape.total_levels,
            noise_seed=_stream_seed(config.seed, i),
        )
        seed_models.append(SeedModel(
            seed=seed, shape=shape, e_target=arr.shape[0], noise=noise,
            ratios=ratios, noise_seed=_stream_seed(config.seed, i),
        ))
        report["ratio_ab"], report["ratio_ac"] = ratios
        fit_report[_edge_type_tag(et)] = report
    timings["fit_structure"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    feature_models = []
    for i, et in enumerate(config.edge_types):
        table = graph.edge_features[i]
        if table is None or not table.schema:
            raise DataError(f"edge type {_edge_type_tag(et)} has no feature columns")
        fm = fit_feature_model(table, backend=config.feature_backend, seed=config.seed)
        fit_report[_edge_type_tag(et)]["bic_table"] = {str(k): v for k, v in fm.bic_table.items()}
        feature_models.append(fm)
    timings["fit_features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    aligner_models = []
    if config.aligner_mode in ("ranked", "exhaustive"):
        struct = structural_features(graph)
        for i, et in enumerate(config.edge_types):
            arr = graph.edges[i]
            eg = arr + np.array(
                [graph.partite_offset(et[0]), graph.partite_offset(et[1])], dtype=np.int64
            )
            aligner_models.append(
                fit_aligner(edge_inputs(struct, eg), graph.edge_features[i], seed=config.seed)
            )
    else:
        aligner_models = [None] * len(config.edge_types)
    timings["fit_aligner"] = time.perf_counter() - t0

    bundle = ModelBundle(
        config=config,
        seed_models=seed_models,
        feature_models=feature_models,
        aligner_models=aligner_models,
        fit_report=fit_report,
        real_summary=_real_summary(graph),
    )
    save_bundle(bundle, out_dir, timings)
    if export_real:
        write_dataset(graph, export_real, config.column_kinds, seed=config.seed, scale=1.0)
    return bundle


def write_dataset(graph: PartiteGraph, out_dir: str, column_kinds: dict,
                  seed: int, scale: float, timings: dict | None = None) -> None:
    with _fresh_dir(out_dir) as tmp:
        manifest = {
            "format_version": FORMAT_VERSION,
            "kind": "dataset",
            "partites": [{"name": n, "size": s} for n, s in graph.partites],
            "edge_types": [],
            "column_kinds": dict(column_kinds),
            "seed": seed,
            "scale": scale,
            "timings": timings or {},
        }
        for name, size in graph.partites:
            frame = pd.DataFrame({"node_id": np.arange(size, dtype=np.int64)})
            if name in graph.node_features:
                frame = pd.concat([frame, graph.node_features[name].to_frame()], axis=1)
            frame.to_csv(os.path.join(tmp, f"nodes_{name}.csv"), index=False)
        for i, et in enumerate(graph.edge_types):
            arr = graph.edges[i]
            frame = pd.DataFrame({"src": arr[:, 0], "dst": arr[:, 1]})
            if graph.edge_features[i] is not None:
                frame = pd.concat([frame, graph.edge_features[i].to_frame()], axis=1)
            frame.to_csv(os.path.join(tmp, f"edges_{_edge_type_tag(et)}.csv"), index=False)
            manifest["edge_types"].append({
                "src": et[0],
                "dst": et[1],
                "n_edges": int(arr.shape[0]),
                "density": arr.shape[0] / (graph.partite_size(et[0]) * graph.partite_size(et[1])),
            })
        _write_json(os.path.join(tmp, "manifest.json"), manifest)


def load_dataset(dataset_dir: str) -> tuple[PartiteGraph, dict]:
    """Read a dataset directory back into a graph plus its column kinds."""
    manifest = _read_json(os.path.join(dataset_dir, "manifest.json"))
    if manifest.get("kind") != "dataset":
        raise DataError(f"{dataset_dir} is not a dataset directory")
    kinds = manifest.get("column_kinds", {})
    partites = tuple((p["name"], int(p["size"])) for p in manifest["partites"])
    edge_types, edges, edge_features = [], [], []
    for entry in manifest["edge_types"]:
        et = (entry["src"], entry["dst"])
        edge_types.append(et)
        path = os.path.join(dataset_dir, f"edges_{_edge_type_tag(et)}.csv")
        try:
            # exact float parse so save/load/save reproduces files byte for byte
            frame = pd.read_csv(path, float_precision="round_trip")
        except FileNotFoundError:
            raise DataError(f"missing edge file: {path}")
        edges.append(frame[["src", "dst"]].to_numpy(dtype=np.int64))
        feat_cols = [c for c in frame.columns if c not in ("src", "dst")]
        if feat_cols:
            table_kinds = {
                c: kinds.get(
                    c,
                    "continuous" if pd.api.types.is_numeric_dtype(frame[c]) else "categorical",
                )
                for c in feat_cols
            }
            edge_features.append(FeatureTable.from_frame(frame[feat_cols], table_kinds))
        else:
            edge_features.append(None)
    graph = PartiteGraph(
        partites=partites,
        edge_types=tuple(edge_types),
        edges=tuple(edges),
        edge_features=tuple(edge_features),
    )
    return graph, manifest


def _scaled_partite_sizes(real_summary: dict, scale: float) -> dict:
    root = math.sqrt(scale)
    return {
        p["name"]: max(1, int(math.floor(p["size"] * root + 0.5)))
        for p in real_summary["partites"]
    }


def generate_graph(bundle: ModelBundle, scale: float, seed: int, workers: int,
                   aligner_mode: str | None = None) -> PartiteGraph:
    """Scale the bundled models and sample a synthetic attributed graph."""
    mode = aligner_mode or bundle.config.aligner_mode
    if mode not in VALID_ALIGNERS:
        raise ConfigError(f"aligner_mode must be one of {VALID_ALIGNERS}")
    sizes = _scaled_partite_sizes(bundle.real_summary, scale)
    partites = tuple((p["name"], sizes[p["name"]]) for p in bundle.real_summary["partites"])
    edges = []
    scaled_models = []
    for i, et in enumerate(bundle.config.edge_types):
        model = scale_model(
            bundle.seed_models[i], scale, n_rows=sizes[et[0]], n_cols=sizes[et[1]]
        )
        scaled_models.append(model)
        edges.append(sample_edges(model, rng_seed=_stream_seed(seed, i), workers=workers))
    graph = PartiteGraph(
        partites=partites,
        edge_types=tuple(bundle.config.edge_types),
        edges=tuple(edges),
    )
    for i, et in enumerate(bundle.config.edge_types):
        count = edges[i].shape[0]
        table = sample_features(
            bundle.feature_models[i], count,
            rng_seed=_stream_seed(seed, i), workers=workers,
        )
        if mode == "none":
            feats = list(graph.edge_features)
            feats[i] = table
            graph = graph.with_features(edge_features=tuple(feats))
        else:
            graph = align(
                graph, table, bundle.aligner_models[i], edge_type=i,
                mode=mode, rng_seed=_stream_seed(seed, i),
            )
    return graph


def cmd_generate(bundle_dir: str, scale: float, seed: int, out_dir: str,
                 workers: int | None = None, aligner_mode: str | None = None) -> None:
    if scale <= 0:
        raise ConfigError("scale must be positive")
    if seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    bundle = load_bundle(bundle_dir)
    effective_workers = workers if workers is not None else bundle.config.workers
    timings = {}
    t0 = time.perf_counter()
    graph = generate_graph(bundle, scale, seed, effective_workers, aligner_mode)
    timings["generate"] = time.perf_counter() - t0
    write_dataset(
        graph, out_dir, bundle.config.column_kinds, seed=seed, scale=scale, timings=timings
    )


def _check_matching_schemas(real: PartiteGraph, synth: PartiteGraph) -> None:
    if real.edge_types != synth.edge_types:
        raise DataError(
            f"edge types differ: {real.edge_types} vs {synth.edge_types}"
        )
    for i, et in enumerate(real.edge_types):
        rt, st = real.edge_features[i], synth.edge_features[i]
        r_cols = [(s.name, s.kind) for s in rt.schema] if rt else []
        s_cols = [(s.name, s.kind) for s in st.schema] if st else []
        if r_cols != s_cols:
            diff = set(r_cols).symmetric_difference(s_cols)
            raise DataError(
                f"feature schemas differ on {_edge_type_tag(et)}: {sorted(diff)}"
            )


def cmd_evaluate(real_dir: str, synth_dir: str, out_dir: str, max_hops: int = 10,
                 num_sources: int = 256, seed: int = 0) -> dict:
    real, _ = load_dataset(real_dir)
    synth, _ = load_dataset(synth_dir)
    _check_matching_schemas(real, synth)
    report = compute_report(real, synth, max_hops=max_hops, num_sources=num_sources, seed=seed)

    with _fresh_dir(out_dir) as tmp:
        payload = report.scores()
        payload["dcc"] = report.dcc_values
        _write_json(os.path.join(tmp, "report.json"), payload)

        hop = pd.DataFrame({
            "hops": np.arange(len(report.hop_real)),
            "reachable_pairs_real": report.hop_real,
            "reachable_pairs_synth": report.hop_synth,
        })
        hop.to_csv(os.path.join(tmp, "hop_plot.csv"), index=False)

        for key, dd in report.degree_histograms.items():
            name = "degree_hist_" + key.replace("/", "_") + ".csv"
            ks = sorted(dd.counts)
            pd.DataFrame({"degree": ks, "count": [dd.counts[k] for k in ks]}).to_csv(
                os.path.join(tmp, name), index=False
            )

        for side, matrices in (("real", report.association_real),
                               ("synth", report.association_synth)):
            for key, mat in matrices.items():
                frame = pd.DataFrame(mat, columns=report.column_names[key])
                frame.insert(0, "column", report.column_names[key])
                frame.to_csv(
                    os.path.join(tmp, f"association_{key}_{side}.csv"), index=False
                )
    return report.scores()


def cmd_baseline(config: PipelineConfig, out_dir: str, kind: str = "er") -> None:
    """Matched-size uniform-structure baseline with independent features."""
    if kind != "er":
        raise ConfigError(f"unknown baseline kind {kind!r}")
    graph = build_real_graph(config)
    uniform = SeedMatrix(0.25, 0.25, 0.25, 0.25)
    seed_models, feature_models = [], []
    for i, et in enumerate(config.edge_types):
        arr = graph.edges[i]
        shape = plan_shape(graph.partite_size(et[0]), graph.partite_size(et[1]))
        seed_models.append(SeedModel(
            seed=uniform,
            shape=shape,
            e_target=arr.shape[0],
            noise=NoiseConfig(0.0, np.zeros(shape.total_levels)),
            ratios=(1.0, 1.0),
            noise_seed=_stream_seed(config.seed, i),
        ))
        feature_models.append(
            fit_feature_model(graph.edge_features[i], backend="independent", seed=config.seed)
        )
    bundle = ModelBundle(
        config=config.with_overrides(feature_backend="independent", aligner_mode="random"),
        seed_models=seed_models,
        feature_models=feature_models,
        aligner_models=[None] * len(config.edge_types),
        fit_report={"baseline": kind},
        real_summary=_real_summary(graph),
    )
    timings = {}
    t0 = time.perf_counter()
    synth = generate_graph(bundle, bundle.config.scale, config.seed, config.workers, "random")
    timings["generate"] = time.perf_counter() - t0
    write_dataset(
        synth, out_dir, config.column_kinds,
        seed=config.seed, scale=bundle.config.scale, timings=timings,
    )

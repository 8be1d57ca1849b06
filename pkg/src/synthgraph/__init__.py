"""Synthetic attributed-graph generation toolkit.

Fit a parametric model of a real attributed graph (structure, tabular
features, and their correlation) and sample scaled synthetic replicas,
with a metrics suite for measuring fidelity.
"""

from .aligner import AlignerModel, align, edge_inputs, fit_aligner, predict_features, similarity
from .boosting import BoostedTreesRegressor
from .errors import CapacityError, ConfigError, DataError, FitError, SynthGraphError
from .featgen import (ContinuousNormalizer, EmbeddingSpec, FeatureModel,
                      denormalize, embedding_size, fit_feature_model,
                      fit_normalizer, normalize, sample_features)
from .graph import (ColumnSpec, ConstructionRules, DegreeDistribution,
                    FeatureTable, PartiteGraph, PartiteRule,
                    build_graph_from_table, degree_distribution)
from .metrics import (MetricsReport, association_matrix, compute_report,
                      correlation_ratio, dcc, degree_dist_score,
                      degree_feature_js, feature_corr_score, hop_plot_compare,
                      js_divergence, theils_u)
from .pipeline import (ModelBundle, PipelineConfig, cmd_baseline, cmd_evaluate,
                       cmd_fit, cmd_generate, generate_graph, load_bundle,
                       load_dataset, save_bundle, write_dataset)
from .structgen import (NoiseConfig, SeedMatrix, SeedModel, ShapePlan,
                        expected_in_degree_counts, expected_out_degree_counts,
                        fit_seed, mle_quadrant_ratios, plan_shape,
                        quadrant_bit_fractions, sample_edges, sample_noise,
                        scale_model)
from .structural import hop_plot, pagerank, structural_features

__version__ = "0.1.0"

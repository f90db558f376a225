//! Quantifies predictive multiplicity across ensembles of equally-performing
//! probabilistic binary classifiers, scores single-model prediction consistency
//! via neighborhood sampling in a standardized embedding space, and verifies the
//! associated concentration bound by Monte Carlo simulation.
//!
//! The crate is organized around the lifecycle of a multiplicity study:
//!
//! - [`tabular`] — CSV ingestion, z-score/one-hot encoding into the embedding
//!   space, stratified few-shot splits, and row serialization templates.
//! - [`model`] — seeded SGD training of logistic / MLP score models, error
//!   evaluation, and construction of the competing set of near-equal models.
//! - [`multiplicity`] — per-point and aggregate disagreement metrics over a
//!   models × points prediction matrix.
//! - [`consistency`] — σ-ball neighborhood sampling, the consistency score,
//!   the neighborhood divergence statistic, and the concentration bound.
//! - [`verifier`] — synthetic stochastic model classes and Monte Carlo
//!   verification of the divergence and consistency bounds.
//! - [`stats`] — tie-aware Spearman rank correlation and the report relating
//!   consistency to evaluated multiplicity.
//! - [`synth`] — a seeded generator for demo tabular datasets.

pub mod consistency;
pub mod model;
#[cfg(test)]
pub(crate) mod testutil;
pub mod multiplicity;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod tabular;
pub mod verifier;

pub use consistency::{
    consistency, consistency_profile, estimate_beta, neighborhood_divergence,
    sample_neighborhood, theorem_bound, ConsistencyError, ConsistencyProfile, ConsistencyScore,
    DivergenceSample, Neighborhood, SamplerConfig,
};
pub use model::{
    build_competing_set, empirical_error, train_model, CompetingSet, ModelError, ModelFamily,
    Predictor, ScoreModel, TrainConfig,
};
pub use multiplicity::{
    arbitrariness, discrepancy, multiplicity_report, pairwise_disagreement, prediction_matrix,
    prediction_range, prediction_variance, MultiplicityAggregates, MultiplicityError,
    MultiplicityReport, PointMultiplicity, PredictionMatrix,
};
pub use stats::{
    average_ranks, correlate_report, spearman, CorrelationReport, MetricCorrelations, StatsError,
};
pub use synth::{demo_schema, generate_demo, DemoData};
pub use tabular::{
    encode, fit_encoder, load_csv, serialize_row, split_shots, ColumnKind, DataError, Dataset,
    EmbeddedDataset, EncoderSpec, Schema, SerializationTemplate, Value,
};
pub use verifier::{
    draw_model, verify_divergence_bound, verify_divergence_bound_with, verify_theorem,
    verify_theorem_with, BaseLogitFn, BoundCell, BoundKind, BoundReport, SyntheticClassConfig,
    SyntheticModel, VerifyError, VerifyOptions,
};

//! Experiment drivers for unitary learning and metric learning.

mod closeness;
mod metric;
mod sampling;
mod unitary;

pub use closeness::{matrix_closeness, matrix_closeness_gauged, Gauge, MAX_CLOSENESS_MODES};
pub use metric::{
    balanced_pair_accuracy, fit_pair_threshold, pair_similarities, run_metric_learning, GramMatrix, InputPattern, MetricObjective,
    MetricOutcome, MetricTaskSpec, PairThreshold,
};
pub use sampling::{frequencies, sample_counts, sample_counts_with, ProbabilityMode};
pub use unitary::{run_unitary_learning, ProbeStates, UnitaryObjective, UnitaryOutcome, UnitaryTaskSpec};
pub use crate::training::cosine_similarity;

//! Classification metrics over prediction logs, ranking of experiments and
//! report renderings.

mod error;
mod log;
mod ranking;
mod render;
mod scores;

pub use error::{MetricsError, Result};
pub use log::{Entry, PredictionLog};
pub use ranking::{
    aggregate_experiment_scores, published_table4, ExperimentScores, RankedExperiment, Ranking,
    Scope, ScopeScores, PUBLISHED_TABLE4,
};
pub use render::{confusion_csv, confusion_svg, results_csv, results_markdown};
pub use scores::{
    accuracy_top_k, compute_report, confusion_matrix, normalized_accuracy_top1, per_class_counts,
    MetricsReport,
};

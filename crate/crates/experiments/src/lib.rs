//! Experiment orchestration for the dish classifiers: training with
//! best-checkpoint selection, scoped evaluation, the six-experiment matrix,
//! category fine-tuning, reports, and the `dishnet` command line.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod modelio;
pub mod pipeline;
pub mod plan;
pub mod report;
pub mod settings;
pub mod train;

pub use dataset::{synthetic_set, ImageSet, Labeling};
pub use error::{ExpError, Result};
pub use evaluate::{evaluate, predict_log};
pub use pipeline::{run_category_experiment, run_experiment, run_matrix, RunResult};
pub use plan::{build_model, plan_matrix, Architecture, ExperimentPlan, ModelScale};
pub use report::emit_report;
pub use settings::{Overrides, Settings};
pub use train::{train, TrainConfig, TrainOutcome};

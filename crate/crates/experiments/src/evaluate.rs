//! Ranked predictions and metrics over an image set.

use dishnet_core::Model;
use dishnet_data::{ChannelMeans, Source};
use dishnet_metrics::{accuracy_top_k, compute_report, MetricsReport, PredictionLog, Scope};
use rayon::prelude::*;

use crate::dataset::ImageSet;
use crate::error::{ExpError, Result};

/// Central-crop predictions for every sample, in set order.
pub fn predict_log(model: &Model<f32>, set: &ImageSet, means: &ChannelMeans) -> Result<PredictionLog> {
    if model.num_classes() != set.num_classes() {
        return Err(ExpError::Validation(format!(
            "model predicts {} classes, the data has {}",
            model.num_classes(),
            set.num_classes()
        )));
    }
    let ranked = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let x = set.eval_input(i, means)?;
            let logits = model.predict(x.data())?;
            if logits.iter().any(|v| !v.is_finite()) {
                return Err(ExpError::Numeric(format!("non-finite logits for sample {i}")));
            }
            Ok(PredictionLog::rank_scores(&logits))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut log = PredictionLog::new(set.num_classes());
    for (&truth, r) in set.labels().iter().zip(ranked) {
        log.push(truth, r)?;
    }
    Ok(log)
}

/// Top-1 accuracy over the whole set.
pub fn accuracy(model: &Model<f32>, set: &ImageSet, means: &ChannelMeans) -> Result<f64> {
    Ok(accuracy_top_k(&predict_log(model, set, means)?, 1)?)
}

pub fn in_scope(scope: Scope, source: Source) -> bool {
    match scope {
        Scope::AB => true,
        Scope::B => source == Source::B,
    }
}

/// Metrics of `model` on the samples of `set` inside `scope`.
pub fn evaluate(
    model: &Model<f32>,
    set: &ImageSet,
    means: &ChannelMeans,
    scope: Scope,
) -> Result<(MetricsReport, PredictionLog)> {
    let subset = set.restrict(|s| in_scope(scope, s));
    if subset.is_empty() {
        return Err(ExpError::Validation(format!(
            "no test images in scope \"{scope}\""
        )));
    }
    let log = predict_log(model, &subset, means)?;
    Ok((compute_report(&log)?, log))
}

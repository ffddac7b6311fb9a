//! Minibatch SGD with step decay and best-checkpoint selection.

use dishnet_core::models::DEFAULT_AUX_DISCOUNT;
use dishnet_core::{FreezeMode, Model, Sgd};
use dishnet_data::ChannelMeans;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::ImageSet;
use crate::error::{ExpError, Result};
use crate::evaluate::accuracy;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Validate after every this many iterations (and after the last one).
    pub validation_interval: usize,
    pub seed: u64,
    pub freeze_mode: FreezeMode,
    pub aux_discount: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 16,
            max_iterations: 3000,
            validation_interval: 250,
            seed: 0,
            freeze_mode: FreezeMode::AllLayers,
            aux_discount: DEFAULT_AUX_DISCOUNT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.momentum)
            && self.batch_size >= 1
            && self.validation_interval >= 1
            && self.aux_discount >= 0.0
            && self.aux_discount.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ExpError::Validation(format!("bad training configuration {self:?}")))
        }
    }

    /// Learning rate at `iteration`: divided by ten after each third of the run.
    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        let step = self.max_iterations.div_ceil(3).max(1);
        self.learning_rate * 0.1f64.powi((iteration / step) as i32)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The parameters that scored best on validation.
    pub model: Model<f32>,
    pub best_iteration: usize,
    pub best_validation_at1: Option<f64>,
    /// Mean minibatch loss of every iteration.
    pub losses: Vec<f64>,
    /// `(iteration, validation AT1)` of every validation pass.
    pub validations: Vec<(usize, f64)>,
}

impl TrainOutcome {
    pub fn losses_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            out.push_str(&format!("{},{l}\n", i + 1));
        }
        out
    }

    pub fn validations_csv(&self) -> String {
        let mut out = String::from("iteration,val_at1\n");
        for (i, a) in &self.validations {
            out.push_str(&format!("{i},{a}\n"));
        }
        out
    }
}

/// Yields minibatches of sample indices, reshuffling after every pass.
struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn next(&mut self, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            let take = (size - batch.len()).min(self.order.len() - self.pos);
            batch.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        batch
    }
}

/// Trains `model` on random crops of `train`. With a non-empty `val` set the
/// model is validated at iteration 0, every `validation_interval` iterations
/// and at the end; the returned model is the first one with the highest
/// validation AT1. Without validation data the final model is returned.
pub fn train(
    mut model: Model<f32>,
    train: &ImageSet,
    val: Option<&ImageSet>,
    means: &ChannelMeans,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(ExpError::Validation("empty training set".into()));
    }
    if model.num_classes() != train.num_classes() {
        return Err(ExpError::Validation(format!(
            "model predicts {} classes, the training data has {}",
            model.num_classes(),
            train.num_classes()
        )));
    }
    model.apply_freeze_mode(cfg.freeze_mode);
    model.set_aux_discount(cfg.aux_discount);
    let val = val.filter(|v| !v.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sampler = BatchSampler::new(train.len());
    let mut opt = Sgd::new(cfg.learning_rate as f32, cfg.momentum as f32);
    let mut losses = Vec::with_capacity(cfg.max_iterations);
    let mut validations = Vec::new();
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    let mut validate = |model: &Model<f32>, it: usize, validations: &mut Vec<(usize, f64)>| -> Result<()> {
        if let Some(v) = val {
            let at1 = accuracy(model, v, means)?;
            log::info!("iteration {it}: validation AT1 {:.4}", at1);
            validations.push((it, at1));
            if best.as_ref().is_none_or(|(b, _, _)| at1 > *b) {
                best = Some((at1, it, model.clone()));
            }
        }
        Ok(())
    };
    validate(&model, 0, &mut validations)?;
    for it in 0..cfg.max_iterations {
        let idx = sampler.next(cfg.batch_size, &mut rng);
        let inputs = idx
            .iter()
            .map(|&i| train.train_input(i, means, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<(&[f32], usize)> = inputs
            .iter()
            .zip(&idx)
            .map(|(x, &i)| (x.data(), train.labels()[i]))
            .collect();
        let grads = model.batch_gradients(&batch)?;
        if !grads.mean_loss.is_finite() {
            return Err(ExpError::Numeric(format!(
                "loss became {} at iteration {}",
                grads.mean_loss,
                it + 1
            )));
        }
        losses.push(grads.mean_loss);
        model.set_gradients(grads)?;
        opt.learning_rate = cfg.learning_rate_at(it) as f32;
        opt.step(model.params_mut())?;
        model.params_mut().zero_grad();
        let done = it + 1;
        if done % cfg.validation_interval == 0 || done == cfg.max_iterations {
            validate(&model, done, &mut validations)?;
        }
    }
    let (model, best_iteration, best_validation_at1) = match best {
        Some((at1, it, m)) => (m, it, Some(at1)),
        None => (model, cfg.max_iterations, None),
    };
    Ok(TrainOutcome {
        model,
        best_iteration,
        best_validation_at1,
        losses,
        validations,
    })
}

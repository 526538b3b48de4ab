use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::config::ModelConfig;
use super::model::{argmax, batch_gradient, cross_entropy, forward};
use super::params::{init_params, ModelParams};
use crate::cam::DiscardRanges;
use crate::error::{Error, Result};
use crate::sampling::{Batch, LibrarySampler, SampleBudget};
use crate::spectra::Library;

/// Scale counts by `width / k` and subtract the row mean, so a short
/// measurement becomes a budget-independent, zero-mean density.
pub fn normalize_counts(counts: &[u64], k: u64) -> Vec<f64> {
    if k == 0 || counts.is_empty() {
        return vec![0.0; counts.len()];
    }
    let scale = counts.len() as f64 / k as f64;
    let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - mean) * scale).collect()
}

/// Row-wise [`normalize_counts`] of a batch, flattened row-major.
pub fn normalize_batch(batch: &Batch, k: u64) -> Vec<f64> {
    (0..batch.rows())
        .flat_map(|r| normalize_counts(batch.row(r), k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub learning_rate: f64,
    /// Stop once validation accuracy reaches this; `None` runs every epoch.
    pub target_accuracy: Option<f64>,
    pub validation_per_class: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 128,
            batches_per_epoch: 134,
            learning_rate: 0.01,
            target_accuracy: Some(0.95),
            validation_per_class: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub optimizer: AdamState,
    /// Mean training loss per completed epoch.
    pub loss_curve: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub sampling_seconds: f64,
    /// 1-based epoch at which the target accuracy was reached.
    pub reached_target_at: Option<usize>,
}

/// Predictions and mean loss over row-major `inputs`.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    inputs: &[f64],
    labels: &[usize],
) -> Result<(Vec<usize>, f64)> {
    let mut preds = Vec::with_capacity(labels.len());
    let mut loss = 0.0;
    for (row, &label) in inputs.chunks_exact(config.input_width).zip(labels) {
        let t = forward(params, config, row)?;
        loss += cross_entropy(&t.probs, label)?;
        preds.push(argmax(&t.probs));
    }
    Ok((preds, loss / labels.len().max(1) as f64))
}

/// Train from fresh initialization with a new RSM-3 batch every iteration.
///
/// The validation set is drawn first from `rng`, then all training batches.
pub fn train<R: Rng + ?Sized>(
    config: &ModelConfig,
    library: &Library,
    budget: SampleBudget,
    settings: &TrainSettings,
    discard: Option<&DiscardRanges>,
    rng: &mut R,
) -> Result<TrainOutcome> {
    config.validate()?;
    if library.len() != config.n_classes {
        return Err(Error::Config(format!(
            "library has {} species but the model expects {} classes",
            library.len(),
            config.n_classes
        )));
    }
    if settings.batch_size == 0 || settings.batches_per_epoch == 0 {
        return Err(Error::Config("batch size and batches per epoch must be positive".into()));
    }
    let sampler = LibrarySampler::new(library)?;
    let width = sampler.output_width(discard)?;
    if width != config.input_width {
        return Err(Error::Shape {
            expected: config.input_width,
            actual: width,
        });
    }

    let mut params = init_params(config)?;
    let mut optimizer = AdamState::new(&params, settings.learning_rate);
    let mut outcome = TrainOutcome {
        params: params.clone(),
        optimizer: optimizer.clone(),
        loss_curve: vec![],
        validation_accuracy: vec![],
        epoch_seconds: vec![],
        sampling_seconds: 0.0,
        reached_target_at: None,
    };
    if settings.epochs == 0 {
        return Ok(outcome);
    }

    let t = Instant::now();
    let val = sampler.stratified(budget, settings.validation_per_class, rng, discard)?;
    let val_inputs = normalize_batch(&val, budget.k());
    outcome.sampling_seconds += t.elapsed().as_secs_f64();

    for epoch in 1..=settings.epochs {
        let start = Instant::now();
        let mut loss_sum = 0.0;
        for _ in 0..settings.batches_per_epoch {
            let t = Instant::now();
            let batch = sampler.batch(budget, settings.batch_size, rng, discard)?;
            let inputs = normalize_batch(&batch, budget.k());
            outcome.sampling_seconds += t.elapsed().as_secs_f64();

            let bg = batch_gradient(&params, config, &inputs, &batch.labels)?;
            if !bg.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("training loss became {}", bg.loss),
                });
            }
            optimizer
                .step_in_place(&mut params, &bg.gradient)
                .map_err(|e| match e {
                    Error::Divergence { detail, .. } => Error::Divergence { epoch, detail },
                    other => other,
                })?;
            loss_sum += bg.loss;
        }
        outcome.loss_curve.push(loss_sum / settings.batches_per_epoch as f64);

        let accuracy = if val.rows() > 0 {
            let (preds, _) = evaluate(&params, config, &val_inputs, &val.labels)?;
            preds.iter().zip(&val.labels).filter(|(p, l)| p == l).count() as f64 / val.rows() as f64
        } else {
            0.0
        };
        outcome.validation_accuracy.push(accuracy);
        outcome.epoch_seconds.push(start.elapsed().as_secs_f64());

        if let Some(target) = settings.target_accuracy {
            if val.rows() > 0 && accuracy >= target {
                outcome.reached_target_at = Some(epoch);
                break;
            }
        }
    }
    outcome.params = params;
    outcome.optimizer = optimizer;
    Ok(outcome)
}

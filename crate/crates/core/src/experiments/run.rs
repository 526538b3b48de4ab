use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::confusion::{confusion_matrix, ConfusionMatrix};
use crate::error::Result;
use crate::nn::{evaluate, normalize_batch, train, AdamState, Checkpoint, ModelConfig, ModelParams};
use crate::rng::{self, streams};
use crate::sampling::{LibrarySampler, SampleBudget};
use crate::spectra::{live_time, Library};

/// Wall-clock measurements of a run, kept apart from the reproducible fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub sampling_seconds: f64,
    pub epoch_seconds: Vec<f64>,
    pub mean_epoch_seconds: f64,
    pub prediction_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub labels: Vec<String>,
    pub budget: u64,
    pub detector_rate: f64,
    pub live_time_seconds: f64,
    pub input_width: usize,
    pub test_samples: usize,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub loss_curve: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    pub epochs_run: usize,
    pub reached_target_at: Option<usize>,
    /// Fewer than two species: accuracy is trivially 1 and nothing is trained.
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl ExperimentReport {
    /// The report with wall-clock fields removed.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub optimizer: AdamState,
}

impl TrainedModel {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            params: self.params.clone(),
            optimizer: Some(self.optimizer.clone()),
        }
    }
}

/// Everything a finished run produces. Degenerate runs have no model.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub model: Option<TrainedModel>,
}

/// Load the configured library (relative paths against `base_dir`) and run.
pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentRun> {
    config.validate()?;
    let library = config.library.load(base_dir)?;
    run_on_library(config, &library)
}

/// Train on fresh RSM-3 batches and evaluate on an independently drawn,
/// class-balanced test set.
pub fn run_on_library(config: &ExperimentConfig, library: &Library) -> Result<ExperimentRun> {
    config.validate()?;
    let start = Instant::now();
    let budget = SampleBudget(config.budget);
    let discard = config.discard_ranges();
    let sampler = LibrarySampler::new(library)?;
    let width = sampler.output_width(discard)?;
    let n_classes = library.len();
    let settings = config.train_settings(n_classes);
    let degenerate = n_classes < 2;

    let mut timings = Timings::default();
    let mut trained = None;
    let (mut loss_curve, mut validation_accuracy, mut reached_target_at) = (vec![], vec![], None);
    if !degenerate {
        let model = config.model_config(width, n_classes);
        let mut train_rng = rng::stream(config.seed, streams::TRAIN);
        let outcome = train(&model, library, budget, &settings, discard, &mut train_rng)?;
        timings.sampling_seconds = outcome.sampling_seconds;
        timings.epoch_seconds = outcome.epoch_seconds;
        loss_curve = outcome.loss_curve;
        validation_accuracy = outcome.validation_accuracy;
        reached_target_at = outcome.reached_target_at;
        trained = Some(TrainedModel {
            config: model,
            params: outcome.params,
            optimizer: outcome.optimizer,
        });
    }

    let mut test_rng = rng::stream(config.seed, streams::TEST);
    let t = Instant::now();
    let test = sampler.stratified(budget, config.test_per_class(n_classes), &mut test_rng, discard)?;
    timings.sampling_seconds += t.elapsed().as_secs_f64();
    let t = Instant::now();
    let predictions = match &trained {
        None => vec![0; test.rows()],
        Some(m) => evaluate(&m.params, &m.config, &normalize_batch(&test, budget.k()), &test.labels)?.0,
    };
    timings.prediction_seconds = t.elapsed().as_secs_f64();

    let confusion = confusion_matrix(&predictions, &test.labels, n_classes)?;
    let accuracy = confusion.weighted_accuracy(&confusion.class_counts());
    let epochs_run = loss_curve.len();
    if epochs_run > 0 {
        timings.mean_epoch_seconds = timings.epoch_seconds.iter().sum::<f64>() / epochs_run as f64;
    }
    timings.total_seconds = start.elapsed().as_secs_f64();

    let rate = config.rate()?;
    let report = ExperimentReport {
        name: config.name.clone(),
        seed: config.seed,
        labels: library.labels(),
        budget: config.budget,
        detector_rate: rate.counts_per_second(),
        live_time_seconds: live_time(config.budget, rate),
        input_width: width,
        test_samples: test.rows(),
        accuracy,
        confusion,
        loss_curve,
        validation_accuracy,
        epochs_run,
        reached_target_at,
        degenerate,
        timings: Some(timings),
    };
    Ok(ExperimentRun {
        report,
        model: trained,
    })
}

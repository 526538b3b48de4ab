use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::libraries;
use crate::cam::DiscardRanges;
use crate::error::{Error, Result};
use crate::nn::{BlockConfig, ModelConfig, TrainSettings};
use crate::rng::{self, streams};
use crate::spectra::{ChannelCalibration, DetectorRate, Library, LibraryManifest, DEFAULT_CHANNELS};

/// Where an experiment gets its species spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LibrarySource {
    /// A library manifest TOML; relative paths resolve against the config file.
    Manifest { path: PathBuf },
    WellSeparated {
        species: usize,
        channels: usize,
        intensity: f64,
        seed: u64,
    },
    NearIdentical {
        species: usize,
        channels: usize,
        intensity: f64,
        seed: u64,
        #[serde(default = "default_family")]
        family: String,
    },
}

fn default_family() -> String {
    "alloy".into()
}

impl LibrarySource {
    pub fn load(&self, base_dir: &Path) -> Result<Library> {
        match self {
            Self::Manifest { path } => {
                let path = base_dir.join(path);
                let manifest = LibraryManifest::read(&path)?;
                manifest.load(path.parent().unwrap_or(Path::new(".")))
            }
            Self::WellSeparated {
                species,
                channels,
                intensity,
                seed,
            } => {
                let cal = ChannelCalibration::pgnaa().with_channels(*channels)?;
                Library::synthesize(&libraries::well_separated(*species, &cal), &cal, *intensity, *seed)
            }
            Self::NearIdentical {
                species,
                channels,
                intensity,
                seed,
                family,
            } => {
                if *species > libraries::MAX_ALLOYS {
                    return Err(Error::Config(format!(
                        "near-identical libraries have at most {} species",
                        libraries::MAX_ALLOYS
                    )));
                }
                let cal = ChannelCalibration::pgnaa().with_channels(*channels)?;
                let specs = libraries::near_identical(*species, &cal, family);
                Library::synthesize(&specs, &cal, *intensity, *seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub blocks: usize,
    pub filters: usize,
    pub kernel_size: usize,
    /// Explicit per-block layout, overriding the three fields above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<BlockConfig>>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            blocks: 4,
            filters: 32,
            kernel_size: 9,
            layers: None,
        }
    }
}

/// Fractions of the per-epoch sample pool used for training, validation
/// and the held-out test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.9,
            validation: 0.05,
            test: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub library: LibrarySource,
    pub budget: u64,
    /// Detector count rate in counts per second, used for live time.
    pub detector_rate: f64,
    pub model: ModelSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Stop training once validation accuracy reaches `target_accuracy`.
    pub early_stop: bool,
    pub target_accuracy: f64,
    /// Samples generated per epoch, divided according to `split`.
    pub pool_size: usize,
    pub split: SplitFractions,
    pub discard: DiscardRanges,
    pub sweep_budgets: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment-1".into(),
            seed: 0,
            library: LibrarySource::WellSeparated {
                species: 12,
                channels: DEFAULT_CHANNELS,
                intensity: 5e7,
                seed: 0,
            },
            budget: 19650,
            detector_rate: DetectorRate::reference().counts_per_second(),
            model: ModelSpec::default(),
            epochs: 150,
            batch_size: 128,
            learning_rate: 0.01,
            early_stop: true,
            target_accuracy: 0.95,
            pool_size: 19000,
            split: SplitFractions::default(),
            discard: DiscardRanges::standard_bands(),
            sweep_budgets: vec![20000, 50000, 100000, 200000, 500000],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.split;
        let parts = [s.train, s.validation, s.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must lie in [0, 1] and sum to 1, got {} + {} + {}",
                s.train, s.validation, s.test
            )));
        }
        if s.train == 0.0 && self.epochs > 0 {
            return Err(Error::Config("training fraction is zero".into()));
        }
        if self.batch_size == 0 || self.pool_size == 0 {
            return Err(Error::Config("batch size and pool size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} is not positive", self.learning_rate)));
        }
        if !(0.0..=1.0).contains(&self.target_accuracy) {
            return Err(Error::Config(format!(
                "target accuracy {} outside [0, 1]",
                self.target_accuracy
            )));
        }
        self.rate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(layers) = &self.model.layers {
            if layers.is_empty() {
                return Err(Error::Config("model needs at least one block".into()));
            }
        } else if self.model.blocks == 0 || self.model.filters == 0 || self.model.kernel_size == 0 {
            return Err(Error::Config("model blocks, filters and kernel size must be positive".into()));
        }
        Ok(())
    }

    pub fn rate(&self) -> Result<DetectorRate> {
        DetectorRate::new(self.detector_rate)
    }

    pub fn discard_ranges(&self) -> Option<&DiscardRanges> {
        (!self.discard.is_empty()).then_some(&self.discard)
    }

    /// Initialization seed of the model, derived from the root seed.
    pub fn model_seed(&self) -> u64 {
        rng::stream(self.seed, streams::MODEL_INIT).random()
    }

    pub fn model_config(&self, input_width: usize, n_classes: usize) -> ModelConfig {
        let seed = self.model_seed();
        match &self.model.layers {
            Some(layers) => ModelConfig {
                input_width,
                n_classes,
                blocks: layers.clone(),
                activation: Default::default(),
                seed,
            },
            None => ModelConfig::standard(
                input_width,
                n_classes,
                self.model.blocks,
                self.model.filters,
                self.model.kernel_size,
                seed,
            ),
        }
    }

    fn per_class(&self, fraction: f64, n_classes: usize) -> usize {
        let n = (fraction * self.pool_size as f64 / n_classes.max(1) as f64).floor() as usize;
        if fraction > 0.0 {
            n.max(1)
        } else {
            0
        }
    }

    pub fn validation_per_class(&self, n_classes: usize) -> usize {
        self.per_class(self.split.validation, n_classes)
    }

    pub fn test_per_class(&self, n_classes: usize) -> usize {
        self.per_class(self.split.test, n_classes)
    }

    pub fn batches_per_epoch(&self) -> usize {
        let rows = (self.split.train * self.pool_size as f64).round() as usize;
        rows.div_ceil(self.batch_size).max(1)
    }

    pub fn train_settings(&self, n_classes: usize) -> TrainSettings {
        TrainSettings {
            epochs: self.epochs,
            batch_size: self.batch_size,
            batches_per_epoch: self.batches_per_epoch(),
            learning_rate: self.learning_rate,
            target_accuracy: self.early_stop.then_some(self.target_accuracy),
            validation_per_class: self.validation_per_class(n_classes),
        }
    }
}

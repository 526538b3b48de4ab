//! Experiment drivers: presets, configuration, runs, sweeps and benchmarks.

mod bench;
mod config;
mod confusion;
pub mod gof;
pub mod libraries;
mod run;
mod sweep;

pub use bench::{benchmark_samplers, BenchReport, BenchRow, MachineInfo, SamplerAgreement};
pub use config::{ExperimentConfig, LibrarySource, ModelSpec, SplitFractions};
pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use run::{run_experiment, run_on_library, ExperimentReport, ExperimentRun, Timings, TrainedModel};
pub use sweep::{count_rate_sweep, SweepReport};

//! Command-line front end: synthesize libraries, draw samples, train,
//! sweep count rates, derive CAM discard ranges, benchmark samplers and
//! summarize finished runs.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 training
//! divergence, 4 I/O error.

mod manifest;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pgnaa_core::cam::{self, DiscardRanges};
use pgnaa_core::experiments::{
    benchmark_samplers, count_rate_sweep, run_on_library, ExperimentConfig, ExperimentReport, SweepReport, Timings,
};
use pgnaa_core::nn::{normalize_batch, read_checkpoint, write_checkpoint};
use pgnaa_core::rng::{self, streams};
use pgnaa_core::sampling::{BatchDumpManifest, LibrarySampler, SampleBudget};
use pgnaa_core::spectra::{write_spectrum_csv, Library, LibraryManifest, SpeciesEntry};
use rand::Rng as _;

pub use manifest::{FileDigest, RunManifest, RunStatus};
pub use output::OUT_ENV;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pgnaa_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use pgnaa_core::Error as E;
        match self {
            Self::Core(E::Divergence { .. }) => 3,
            Self::Core(E::Io { .. }) | Self::Io { .. } => 4,
            Self::Core(_) | Self::Usage(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "pgnaa", version, about = "PGNAA spectral classification lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML); `synth` takes a library manifest instead.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `$PGNAA_OUT/<name>` (root `runs`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Concurrent workers for sweeps.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Override the event budget k.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Override discard ranges, e.g. `0-103,8000-16383` or `none`.
    #[arg(long)]
    pub discard: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Realize a synthetic library manifest into per-species CSV files.
    Synth(Common),
    /// Draw one RSM-3 batch and dump it.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Rows to draw; defaults to the configured batch size.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Train and evaluate one model.
    Train(Common),
    /// Train once per budget of the configured sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Budgets to sweep, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u64>>,
    },
    /// Channel importance and discard ranges from a trained checkpoint.
    Cam {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Samples per class used for the importance average.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = cam::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = cam::DEFAULT_MIN_RUN)]
        min_run: usize,
    },
    /// Time every sampling method on the first species of the library.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 30)]
        reps: usize,
    },
    /// Print a human-readable summary of a finished run directory.
    Report {
        /// Run directory holding `report.json` or `sweep.json`.
        dir: PathBuf,
    },
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(c) => cmd_synth(&c),
        Command::Sample { common, rows } => cmd_sample(&common, rows),
        Command::Train(c) => cmd_train(&c),
        Command::Sweep { common, budgets } => cmd_sweep(&common, budgets),
        Command::Cam {
            common,
            checkpoint,
            samples,
            threshold,
            min_run,
        } => cmd_cam(&common, &checkpoint, samples, threshold, min_run),
        Command::Bench { common, reps } => cmd_bench(&common, reps),
        Command::Report { dir } => cmd_report(&dir).map(|text| print!("{text}")),
    }
}

fn base_dir(config_path: &Path) -> &Path {
    config_path.parent().unwrap_or(Path::new("."))
}

/// Effective configuration after command-line overrides.
fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::read(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(budget) = common.budget {
        config.budget = budget;
    }
    if let Some(text) = &common.discard {
        config.discard = DiscardRanges::parse(text)?;
    }
    config.validate()?;
    Ok(config)
}

/// Digests of the config file and every file the library reads.
fn input_digests(common: &Common, config: &ExperimentConfig) -> Result<Vec<FileDigest>> {
    let mut inputs = vec![FileDigest::of(&common.config)?];
    if let pgnaa_core::experiments::LibrarySource::Manifest { path } = &config.library {
        let path = base_dir(&common.config).join(path);
        inputs.push(FileDigest::of(&path)?);
        let manifest = LibraryManifest::read(&path)?;
        for csv in manifest.csv_paths(base_dir(&path)) {
            inputs.push(FileDigest::of(&csv)?);
        }
    }
    Ok(inputs)
}

fn cmd_synth(common: &Common) -> Result<()> {
    let mut manifest = LibraryManifest::read(&common.config)?;
    if manifest.species.is_empty() {
        return Err(pgnaa_core::Error::Config("library manifest lists no species".into()).into());
    }
    if let Some(seed) = common.seed {
        for (i, entry) in manifest.species.iter_mut().enumerate() {
            if let Some(syn) = &mut entry.synthetic {
                syn.seed = rng::stream(seed, streams::SYNTH).random::<u64>().wrapping_add(i as u64);
            }
        }
    }
    let out = output::resolve(common.out.as_deref(), "synth")?;
    let snapshot = manifest.to_toml_string()?;
    let mut run = RunManifest::start(&out, "synth", common.seed.unwrap_or(0), &snapshot, vec![FileDigest::of(&common.config)?])?;

    let library = manifest.load(base_dir(&common.config))?;
    let mut entries = vec![];
    for s in library.species() {
        let name = format!("{}.csv", output::file_stem(s.label()));
        let path = out.join(&name);
        write_spectrum_csv(s, &path)?;
        run.outputs.push(name.clone());
        entries.push(SpeciesEntry {
            label: s.label().to_string(),
            csv: Some(PathBuf::from(name)),
            synthetic: None,
        });
    }
    let realized = LibraryManifest {
        calibration: *library.calibration(),
        species: entries,
    };
    output::write_text(&out, "library.toml", &realized.to_toml_string()?, &mut run)?;
    run.finish(&out)
}

fn cmd_sample(common: &Common, rows: Option<usize>) -> Result<()> {
    let config = load_config(common)?;
    let out = output::resolve(common.out.as_deref(), &config.name)?;
    let mut run = RunManifest::start(&out, "sample", config.seed, &config.to_toml_string()?, input_digests(common, &config)?)?;
    let library = config.library.load(base_dir(&common.config))?;
    let rows = rows.unwrap_or(config.batch_size);
    if rows == 0 {
        return Err(CliError::Usage("--rows must be at least 1".into()));
    }
    let budget = SampleBudget(config.budget);
    let mut r = rng::stream(config.seed, streams::SAMPLE);
    let batch = LibrarySampler::new(&library)?.batch(budget, rows, &mut r, config.discard_ranges())?;
    let dump = BatchDumpManifest {
        seed: config.seed,
        budget,
        rows,
        width: batch.width,
        discard: config.discard.clone(),
        labels: batch.labels.clone(),
        species: library.labels(),
    };
    batch.write_dump(&out, "batch", &dump)?;
    run.outputs.extend(["batch.bin".into(), "batch.json".into()]);
    run.finish(&out)
}

fn cmd_train(common: &Common) -> Result<()> {
    let config = load_config(common)?;
    let out = output::resolve(common.out.as_deref(), &config.name)?;
    let mut run = RunManifest::start(&out, "train", config.seed, &config.to_toml_string()?, input_digests(common, &config)?)?;
    let library = config.library.load(base_dir(&common.config))?;
    let result = run_on_library(&config, &library)?;
    output::write_text(&out, "config.toml", &config.to_toml_string()?, &mut run)?;
    write_run_artifacts(&out, &result.report, &mut run)?;
    if let Some(model) = &result.model {
        write_checkpoint(out.join("checkpoint.bin"), &model.checkpoint())?;
        run.outputs.push("checkpoint.bin".into());
    }
    run.finish(&out)
}

/// report.json, timings.json, loss_curve.csv, confusion.csv and a plot script.
fn write_run_artifacts(dir: &Path, report: &ExperimentReport, run: &mut RunManifest) -> Result<()> {
    let prefix = dir.strip_prefix(&run.dir).unwrap_or(Path::new("")).to_path_buf();
    let mut local = vec![];
    output::write_json(dir, "report.json", &report.without_timings(), &mut local)?;
    output::write_json(dir, "timings.json", &report.timings.clone().unwrap_or_default(), &mut local)?;
    output::write_text(dir, "loss_curve.csv", &output::loss_curve_csv(report), &mut local)?;
    let mut confusion = vec![];
    report
        .confusion
        .write_csv(&report.labels, &mut confusion)
        .map_err(|e| CliError::io(dir.join("confusion.csv"), e))?;
    output::write_bytes(dir, "confusion.csv", &confusion, &mut local)?;
    output::write_text(dir, "loss_curve.gp", output::LOSS_CURVE_GNUPLOT, &mut local)?;
    run.outputs.extend(local.into_iter().map(|p| prefix.join(p).to_string_lossy().into_owned()));
    Ok(())
}

fn cmd_sweep(common: &Common, budgets: Option<Vec<u64>>) -> Result<()> {
    let config = load_config(common)?;
    let budgets = budgets.unwrap_or_else(|| config.sweep_budgets.clone());
    let out = output::resolve(common.out.as_deref(), &config.name)?;
    let mut run = RunManifest::start(&out, "sweep", config.seed, &config.to_toml_string()?, input_digests(common, &config)?)?;
    let library = config.library.load(base_dir(&common.config))?;
    let (report, runs) = count_rate_sweep(&config, &library, &budgets, common.jobs.max(1))?;
    for r in &runs {
        let sub = out.join(format!("k{}", r.report.budget));
        fs::create_dir_all(&sub).map_err(|e| CliError::io(&sub, e))?;
        write_run_artifacts(&sub, &r.report, &mut run)?;
        if let Some(model) = &r.model {
            write_checkpoint(sub.join("checkpoint.bin"), &model.checkpoint())?;
            run.outputs.push(format!("k{}/checkpoint.bin", r.report.budget));
        }
    }
    output::write_json(&out, "sweep.json", &report.without_timings(), &mut run)?;
    let timings: Vec<(u64, Timings)> = report
        .runs
        .iter()
        .map(|r| (r.budget, r.timings.clone().unwrap_or_default()))
        .collect();
    output::write_json(&out, "timings.json", &timings, &mut run)?;
    output::write_text(&out, "sweep_curves.csv", &output::sweep_curves_csv(&report), &mut run)?;
    output::write_text(&out, "sweep_curves.gp", &output::sweep_gnuplot(&report), &mut run)?;
    run.finish(&out)
}

#[derive(serde::Serialize)]
struct CamSummary {
    argmax_channel: usize,
    argmax_energy_kev: f64,
    threshold: f64,
    min_run: usize,
    discard: DiscardRanges,
    discarded_channels: usize,
    kept_width: usize,
}

fn cmd_cam(common: &Common, checkpoint: &Path, samples: usize, threshold: f64, min_run: usize) -> Result<()> {
    let config = load_config(common)?;
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let out = output::resolve(common.out.as_deref(), &config.name)?;
    let mut inputs = input_digests(common, &config)?;
    inputs.push(FileDigest::of(checkpoint)?);
    let mut run = RunManifest::start(&out, "cam", config.seed, &config.to_toml_string()?, inputs)?;
    let library = config.library.load(base_dir(&common.config))?;
    let ckpt = read_checkpoint(checkpoint)?;
    let applied = config.discard_ranges();
    let budget = SampleBudget(config.budget);
    let mut r = rng::stream(config.seed, streams::VALIDATION);
    let batch = LibrarySampler::new(&library)?.stratified(budget, samples, &mut r, applied)?;
    let kept = cam::aggregate_importance(&ckpt.params, &ckpt.config, &normalize_batch(&batch, budget.k()), &batch.labels)?;
    let full = expand_to_full_width(&kept.scores, applied, library.n_channels())?;
    let importance = cam::ChannelImportance::from_raw(&full)?;
    let mut discard = cam::select_discard_ranges(&importance, threshold, min_run);
    if let Some(a) = applied {
        discard = discard.union(a);
    }

    let mut csv = vec![];
    importance
        .write_csv(library.calibration(), &mut csv)
        .map_err(|e| CliError::io(out.join("importance.csv"), e))?;
    output::write_bytes(&out, "importance.csv", &csv, &mut run)?;
    let mut csv = vec![];
    discard.write_csv(&mut csv).map_err(|e| CliError::io(out.join("discard.csv"), e))?;
    output::write_bytes(&out, "discard.csv", &csv, &mut run)?;
    let argmax = importance.argmax();
    let summary = CamSummary {
        argmax_channel: argmax,
        argmax_energy_kev: library.calibration().energy_of_channel(argmax)?,
        threshold,
        min_run,
        discarded_channels: discard.discarded(),
        kept_width: discard.kept_width(library.n_channels())?,
        discard,
    };
    output::write_json(&out, "cam.json", &summary, &mut run)?;
    output::write_text(&out, "importance.gp", output::IMPORTANCE_GNUPLOT, &mut run)?;
    run.finish(&out)
}

/// Scores over kept channels placed back at their detector channels;
/// discarded channels score zero.
fn expand_to_full_width(scores: &[f64], applied: Option<&DiscardRanges>, width: usize) -> Result<Vec<f64>> {
    let Some(applied) = applied else {
        return Ok(scores.to_vec());
    };
    let mut full = vec![0.0; width];
    let mut it = scores.iter();
    let mut ranges = applied.ranges().iter().peekable();
    for (ch, slot) in full.iter_mut().enumerate() {
        while ranges.peek().is_some_and(|&&(_, hi)| hi < ch) {
            ranges.next();
        }
        if ranges.peek().is_some_and(|&&(lo, _)| lo <= ch) {
            continue;
        }
        *slot = *it
            .next()
            .ok_or_else(|| CliError::Usage("checkpoint width does not match the discard ranges".into()))?;
    }
    if it.next().is_some() {
        return Err(CliError::Usage("checkpoint width does not match the discard ranges".into()));
    }
    Ok(full)
}

fn cmd_bench(common: &Common, reps: usize) -> Result<()> {
    let config = load_config(common)?;
    let out = output::resolve(common.out.as_deref(), &config.name)?;
    let mut run = RunManifest::start(&out, "bench", config.seed, &config.to_toml_string()?, input_digests(common, &config)?)?;
    let library: Library = config.library.load(base_dir(&common.config))?;
    let report = benchmark_samplers(&library.species()[0], SampleBudget(config.budget), reps, config.seed)?;
    output::write_json(&out, "bench.json", &report, &mut run)?;
    let mut csv = String::from("method,median_ms,p95_ms\n");
    for row in &report.rows {
        csv.push_str(&format!("{},{},{}\n", row.method, row.median_ms, row.p95_ms));
    }
    output::write_text(&out, "bench.csv", &csv, &mut run)?;
    run.finish(&out)
}

/// Summary text of a run directory; also written to `summary.txt` there.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let text = if dir.join("report.json").exists() {
        let mut report: ExperimentReport = output::read_json(&dir.join("report.json"))?;
        if dir.join("timings.json").exists() {
            report.timings = Some(output::read_json(&dir.join("timings.json"))?);
        }
        output::summarize_run(&report)
    } else if dir.join("sweep.json").exists() {
        let report: SweepReport = output::read_json(&dir.join("sweep.json"))?;
        output::summarize_sweep(&report)
    } else {
        return Err(CliError::Usage(format!(
            "{} holds neither report.json nor sweep.json",
            dir.display()
        )));
    };
    let path = dir.join("summary.txt");
    fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        use pgnaa_core::Error as E;
        assert_eq!(CliError::from(E::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(E::Validation("x".into())).exit_code(), 2);
        let div = E::Divergence {
            epoch: 3,
            detail: "nan".into(),
        };
        assert_eq!(CliError::from(div).exit_code(), 3);
        let io = CliError::io("x", std::io::Error::other("boom"));
        assert_eq!(io.exit_code(), 4);
    }

    #[test]
    fn expansion_restores_detector_positions() {
        let applied = DiscardRanges::new(vec![(0, 1), (5, 6)]).unwrap();
        let full = expand_to_full_width(&[1.0, 2.0, 3.0, 4.0], Some(&applied), 8).unwrap();
        assert_eq!(full, vec![0.0, 0.0, 1.0, 2.0, 3.0, 0.0, 0.0, 4.0]);
        assert!(expand_to_full_width(&[1.0], Some(&applied), 8).is_err());
        assert!(expand_to_full_width(&[1.0; 5], Some(&applied), 8).is_err());
    }
}

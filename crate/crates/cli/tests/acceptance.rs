//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::Instant;

use pgnaa_cli::{main_with_args, RunManifest};
use pgnaa_core::cam::{aggregate_importance, compute_cam, select_discard_ranges, DiscardRanges};
use pgnaa_core::experiments::gof::chi_square_gof;
use pgnaa_core::experiments::{
    benchmark_samplers, confusion_matrix, run_on_library, ExperimentConfig, ExperimentRun, LibrarySource, ModelSpec,
};
use pgnaa_core::nn::{
    backward, cross_entropy, forward, init_params, normalize_batch, Activation, BlockConfig, ModelConfig, ModelParams,
};
use pgnaa_core::rng::{self, seeded, streams};
use pgnaa_core::sampling::{rsm3_weighted_counts, LibrarySampler, SampleBudget};
use pgnaa_core::spectra::{live_time, ChannelCalibration, DetectorRate, Provenance, Spectrum};
use rand::Rng;

const ALPHA: f64 = 0.001;

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn toy_gof() -> Outcome {
    let start = Instant::now();
    let cal = ChannelCalibration::new(4, 1.3, 1.3).map_err(err)?;
    let s = Spectrum::new(cal, vec![1, 10, 2, 0], "toy", Provenance::Measured).map_err(err)?;
    let k = 5u64;
    let p: [f64; 3] = [1.0 / 13.0, 10.0 / 13.0, 2.0 / 13.0];
    let mut outcomes = vec![];
    for a in 0..=k {
        for b in 0..=k - a {
            let c = k - a - b;
            let coef = factorial(k) / (factorial(a) * factorial(b) * factorial(c));
            outcomes.push(([a, b, c], coef * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)));
        }
    }
    let mut observed = vec![0u64; outcomes.len()];
    let mut conserved = true;
    let mut r = seeded(1);
    for _ in 0..100_000 {
        let d = rsm3_weighted_counts(&s, SampleBudget(k), &mut r).map_err(err)?;
        conserved &= d.total() == k && d.counts[3] == 0;
        let key = [d.counts[0], d.counts[1], d.counts[2]];
        match outcomes.iter().position(|o| o.0 == key) {
            Some(i) => observed[i] += 1,
            None => conserved = false,
        }
    }
    let probs: Vec<f64> = outcomes.iter().map(|o| o.1).collect();
    let test = chi_square_gof(&observed, &probs).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        outcomes.len() == 21 && conserved && test.passes(ALPHA) && secs <= 10.0,
        format!(
            "{} outcomes, chi2 {:.2} on {} df (p {:.4}), budget conserved: {conserved}, {secs:.2} s",
            outcomes.len(),
            test.statistic,
            test.df,
            test.p_value
        ),
    ))
}

fn sampler_throughput() -> Outcome {
    let library = LibrarySource::WellSeparated {
        species: 1,
        channels: 16384,
        intensity: 5e7,
        seed: 0,
    }
    .load(Path::new("."))
    .map_err(err)?;
    let report = benchmark_samplers(&library.species()[0], SampleBudget(500_000), 30, 7).map_err(err)?;
    let fast = report.row("rsm3").ok_or("no rsm3 row")?;
    let baseline = report.row("rsm3-events").ok_or("no baseline row")?;
    let agree = report.agreement.as_ref().ok_or("no agreement")?;
    let same = agree.fast.passes(ALPHA) && agree.baseline.passes(ALPHA) && agree.homogeneity.passes(ALPHA);
    Ok((
        fast.median_ms <= 100.0 && same,
        format!(
            "rsm3 median {:.1} ms (baseline {:.1} ms); homogeneity p {:.4}, fast GOF p {:.4}, baseline GOF p {:.4}",
            fast.median_ms, baseline.median_ms, agree.homogeneity.p_value, agree.fast.p_value, agree.baseline.p_value
        ),
    ))
}

fn loss(params: &ModelParams, config: &ModelConfig, input: &[f64], label: usize) -> Result<f64, String> {
    let t = forward(params, config, input).map_err(err)?;
    cross_entropy(&t.probs, label).map_err(err)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let config = ModelConfig {
        input_width: 64,
        n_classes: 4,
        blocks: vec![BlockConfig::new(6, 5, 2, true), BlockConfig::new(6, 5, 1, true)],
        activation: Activation::Relu,
        seed: 13,
    };
    let params = init_params(&config).map_err(err)?;
    let mut r = seeded(2);
    let input: Vec<f64> = (0..64).map(|_| r.random_range(-1.0..1.0)).collect();
    let label = 2;
    let trace = forward(&params, &config, &input).map_err(err)?;
    let grad = backward(&trace, &params, &config, label).map_err(err)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.as_mut_slice()[i] += h;
        let mut minus = params.clone();
        minus.as_mut_slice()[i] -= h;
        let numeric = (loss(&plus, &config, &input, label)? - loss(&minus, &config, &input, label)?) / (2.0 * h);
        let analytic = grad.as_slice()[i];
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-4 && secs <= 60.0,
        format!("{} parameters, max relative error {worst:.2e}, {secs:.2} s", params.len()),
    ))
}

fn cam_identity() -> Outcome {
    let mut r = seeded(3);
    let mut worst: f64 = 0.0;
    for m in 0..100u64 {
        let n_blocks = r.random_range(1..4);
        let blocks = (0..n_blocks)
            .map(|_| BlockConfig::new(r.random_range(1..6), 2 * r.random_range(0..3) + 1, r.random_range(1..3), true))
            .collect();
        let config = ModelConfig {
            input_width: r.random_range(8..80),
            n_classes: r.random_range(2..6),
            blocks,
            activation: Activation::Relu,
            seed: m,
        };
        let mut params = init_params(&config).map_err(err)?;
        for b in params.head_bias_mut() {
            *b = r.random_range(-1.0..1.0);
        }
        let input: Vec<f64> = (0..config.input_width).map(|_| r.random_range(-2.0..2.0)).collect();
        let trace = forward(&params, &config, &input).map_err(err)?;
        for c in 0..config.n_classes {
            let map = compute_cam(&params, &config, &trace, c).map_err(err)?;
            let mean = map.raw.iter().sum::<f64>() / map.raw.len() as f64;
            worst = worst.max((mean - (trace.logits[c] - params.head_bias()[c])).abs());
        }
    }
    Ok((worst <= 1e-9, format!("100 random models, max deviation {worst:.2e}")))
}

/// Twelve well-separated species on a 2048-channel detector at k = 19650.
fn well_separated_config() -> ExperimentConfig {
    ExperimentConfig {
        name: "well-separated".into(),
        seed: 0,
        library: LibrarySource::WellSeparated {
            species: 12,
            channels: 2048,
            intensity: 5e7,
            seed: 0,
        },
        budget: 19_650,
        model: ModelSpec {
            blocks: 4,
            filters: 8,
            kernel_size: 9,
            layers: None,
        },
        epochs: 150,
        batch_size: 128,
        learning_rate: 0.01,
        early_stop: true,
        target_accuracy: 0.95,
        pool_size: 19_000,
        discard: DiscardRanges::default(),
        ..Default::default()
    }
}

fn well_separated_accuracy() -> Outcome {
    let start = Instant::now();
    let config = well_separated_config();
    let library = config.library.load(Path::new(".")).map_err(err)?;
    let report = run_on_library(&config, &library).map_err(err)?.report;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        report.accuracy >= 0.95 && report.epochs_run <= 150 && secs <= 1200.0,
        format!(
            "accuracy {:.4} on {} held-out samples after {} epochs, {secs:.0} s",
            report.accuracy, report.test_samples, report.epochs_run
        ),
    ))
}

fn count_rate_gain() -> Outcome {
    let mut means = vec![];
    let mut detail = vec![];
    for budget in [500_000u64, 20_000] {
        let mut accs = vec![];
        for seed in 1..=5u64 {
            let config = ExperimentConfig {
                name: format!("near-identical-{budget}-{seed}"),
                seed,
                library: LibrarySource::NearIdentical {
                    species: 4,
                    channels: 512,
                    intensity: 2e8,
                    seed,
                    family: "alloy".into(),
                },
                budget,
                model: ModelSpec {
                    blocks: 2,
                    filters: 8,
                    kernel_size: 9,
                    layers: None,
                },
                epochs: 30,
                batch_size: 128,
                learning_rate: 0.01,
                early_stop: false,
                pool_size: 4000,
                discard: DiscardRanges::default(),
                ..Default::default()
            };
            let library = config.library.load(Path::new(".")).map_err(err)?;
            accs.push(run_on_library(&config, &library).map_err(err)?.report.accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        detail.push(format!("k={budget}: mean {mean:.3} {accs:.3?}"));
        means.push(mean);
    }
    let gain = means[0] - means[1];
    Ok((gain >= 0.10, format!("gain {gain:.3}; {}", detail.join("; "))))
}

fn mean_epoch(run: &ExperimentRun) -> f64 {
    run.report.timings.as_ref().map_or(f64::NAN, |t| t.mean_epoch_seconds)
}

fn pruning_economy() -> Outcome {
    let mut config = well_separated_config();
    config.epochs = 4;
    config.early_stop = false;
    let library = config.library.load(Path::new(".")).map_err(err)?;
    let full = run_on_library(&config, &library).map_err(err)?;
    let model = full.model.as_ref().ok_or("no trained model")?;

    let budget = SampleBudget(config.budget);
    let sampler = LibrarySampler::new(&library).map_err(err)?;
    let batch = sampler
        .stratified(budget, 20, &mut rng::stream(config.seed, streams::VALIDATION), None)
        .map_err(err)?;
    let importance = aggregate_importance(&model.params, &model.config, &normalize_batch(&batch, budget.k()), &batch.labels)
        .map_err(err)?;
    let width = library.n_channels();
    // the detector-scale minimum run of 256 channels, scaled to this width
    let min_run = 256 * width / 16384;
    let discard = select_discard_ranges(&importance, 0.05, min_run);
    let fraction = discard.discarded() as f64 / width as f64;

    let mut pruned_config = config.clone();
    pruned_config.discard = discard.clone();
    let pruned = run_on_library(&pruned_config, &library).map_err(err)?;
    let (t_full, t_pruned) = (mean_epoch(&full), mean_epoch(&pruned));
    let reduction = 1.0 - t_pruned / t_full;
    let loss = full.report.accuracy - pruned.report.accuracy;
    Ok((
        fraction >= 0.5 && reduction >= 0.25 && loss <= 0.02,
        format!(
            "discarded {:.1}% {:?}; epoch {t_full:.2} s -> {t_pruned:.2} s ({:.1}% faster); accuracy {:.4} -> {:.4}",
            100.0 * fraction,
            discard.ranges(),
            100.0 * reduction,
            full.report.accuracy,
            pruned.report.accuracy
        ),
    ))
}

const DETERMINISM_CONFIG: &str = r#"
name = "determinism"
seed = 11
budget = 3000
epochs = 2
batch_size = 16
pool_size = 320
early_stop = false
discard = [[0, 15]]
sweep_budgets = [1500, 3000]

[library]
kind = "well_separated"
species = 3
channels = 256
intensity = 1e6
seed = 2

[model]
blocks = 2
filters = 4
kernel_size = 5
"#;

fn cli(args: &[&str]) -> Result<(), String> {
    match main_with_args(std::iter::once("pgnaa").chain(args.iter().copied())) {
        0 => Ok(()),
        code => Err(format!("`{}` exited with {code}", args.join(" "))),
    }
}

/// Every file under `dir` except wall-clock timings, as (relative path,
/// bytes). Run manifests name their input files by path, which differs
/// between output roots, so only their digests are compared.
fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(err)? {
            let path = entry.map_err(err)?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != "timings.json") {
                let rel = path.strip_prefix(dir).map_err(err)?.to_string_lossy().into_owned();
                let mut bytes = fs::read(&path).map_err(err)?;
                if rel.ends_with("manifest.json") {
                    let mut m: RunManifest = serde_json::from_slice(&bytes).map_err(err)?;
                    m.inputs.iter_mut().for_each(|i| i.path.clear());
                    bytes = serde_json::to_vec(&m).map_err(err)?;
                }
                files.push((rel, bytes));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let cfg = tmp.path().join("determinism.toml");
    fs::write(&cfg, DETERMINISM_CONFIG).map_err(err)?;
    let cfg = cfg.to_str().ok_or("non-UTF-8 temp path")?;
    let mut snapshots = vec![];
    for attempt in ["a", "b"] {
        let root = tmp.path().join(attempt);
        let dir = |name: &str| root.join(name).to_string_lossy().into_owned();
        cli(&["train", "--config", cfg, "--out", &dir("train")])?;
        let ckpt = root.join("train/checkpoint.bin").to_string_lossy().into_owned();
        cli(&["cam", "--config", cfg, "--checkpoint", &ckpt, "--out", &dir("cam"), "--samples", "4", "--min-run", "16"])?;
        cli(&["sweep", "--config", cfg, "--out", &dir("sweep"), "--jobs", "2"])?;
        cli(&["sample", "--config", cfg, "--out", &dir("sample"), "--rows", "9"])?;
        snapshots.push(snapshot(&root)?);
    }
    let differing: Vec<&str> = snapshots[0]
        .iter()
        .zip(&snapshots[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let same_listing = snapshots[0].len() == snapshots[1].len();
    Ok((
        same_listing && differing.is_empty() && !snapshots[0].is_empty(),
        format!("{} files compared, differing: {differing:?}", snapshots[0].len()),
    ))
}

fn confusion_and_live_time() -> Outcome {
    let mut labels = vec![0usize; 100];
    let mut predictions: Vec<usize> = (0..100).map(|i| if i < 72 { 0 } else { 1 }).collect();
    labels.extend([1, 1]);
    predictions.extend([1, 1]);
    let cm = confusion_matrix(&predictions, &labels, 2).map_err(err)?;
    let mut csv = vec![];
    cm.write_csv(&["Al".into(), "Cu".into()], &mut csv).map_err(err)?;
    let csv = String::from_utf8(csv).map_err(err)?;
    let row_ok = cm.values[0] == vec![0.72, 0.28] && csv.lines().any(|l| l == "Al,0.72,0.28");
    let t = live_time(19_650, DetectorRate::new(7926.58).map_err(err)?);
    Ok((
        row_ok && (t - 2.479).abs() <= 1e-3,
        format!("row {:?}, live time {t:.4} s", cm.values[0]),
    ))
}

fn main() {
    let only: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("RSM-3 toy goodness of fit", toy_gof),
        ("RSM-3 throughput and sampler agreement", sampler_throughput),
        ("gradient check", gradient_check),
        ("CAM mean equals logit minus bias", cam_identity),
        ("well-separated library accuracy", well_separated_accuracy),
        ("near-identical library count-rate gain", count_rate_gain),
        ("CAM pruning economy", pruning_economy),
        ("determinism of reports and artifacts", determinism),
        ("confusion row and live time", confusion_and_live_time),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failures += 1;
        }
        println!("criterion {} ({name}): {}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    if failures > 0 {
        std::process::exit(1);
    }
}

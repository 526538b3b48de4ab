use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gof::{chi_square_gof, chi_square_homogeneity, ChiSquareTest};
use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::{
    retain_fraction_for_budget, rsm1_event_list, rsm2_binomial_thinning, rsm3_with_method, rsm4_render,
    MultinomialMethod, RasterMode, RenderSource, SampleBudget, DEFAULT_RASTER_SIZE,
};
use crate::spectra::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub tool_version: String,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub median_ms: f64,
    pub p95_ms: f64,
}

/// Channel totals of the timed draws of the fast RSM-3 route and of the
/// event-by-event baseline, each tested against the spectrum and against
/// each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerAgreement {
    pub draws: usize,
    pub fast: ChiSquareTest,
    pub baseline: ChiSquareTest,
    pub homogeneity: ChiSquareTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub machine: MachineInfo,
    pub label: String,
    pub budget: u64,
    pub n_channels: usize,
    pub repetitions: usize,
    pub rows: Vec<BenchRow>,
    /// Absent when the budget is zero.
    pub agreement: Option<SamplerAgreement>,
}

impl BenchReport {
    pub fn row(&self, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn time_draws(repetitions: usize, mut draw: impl FnMut() -> Result<()>) -> Result<(f64, f64)> {
    let mut ms = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let t = Instant::now();
        draw()?;
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    ms.sort_by(f64::total_cmp);
    Ok((quantile(&ms, 0.5), quantile(&ms, 0.95)))
}

fn add_into(acc: &mut [u64], counts: &[u64]) {
    for (a, c) in acc.iter_mut().zip(counts) {
        *a += c;
    }
}

/// Per-draw wall clock of every sampling method on one spectrum, single
/// threaded. Methods: `rsm1`, `rsm2`, `rsm3` (automatic route),
/// `rsm3-events` (one alias draw per event), `rsm3-binomial` and `rsm4`
/// (RSM-3 followed by a histogram raster). Every draw starts from the raw
/// spectrum, so table preparation is included.
pub fn benchmark_samplers(spectrum: &Spectrum, budget: SampleBudget, repetitions: usize, seed: u64) -> Result<BenchReport> {
    if repetitions < 10 {
        return Err(Error::validation(format!(
            "benchmarks need at least 10 repetitions, got {repetitions}"
        )));
    }
    let n = spectrum.n_channels();
    let cal = *spectrum.calibration();
    let mut rows = vec![];
    let mut push = |method: &str, (median_ms, p95_ms): (f64, f64)| {
        rows.push(BenchRow {
            method: method.into(),
            median_ms,
            p95_ms,
        })
    };

    let mut r = rng::stream(seed, 1);
    push(
        "rsm1",
        time_draws(repetitions, || rsm1_event_list(spectrum, budget, &mut r).map(drop))?,
    );

    let mut r = rng::stream(seed, 2);
    push(
        "rsm2",
        time_draws(repetitions, || {
            let p = retain_fraction_for_budget(spectrum, budget)?;
            rsm2_binomial_thinning(spectrum, p, &mut r).map(drop)
        })?,
    );

    let mut sums = [vec![0u64; n], vec![0u64; n], vec![0u64; n]];
    let methods = [
        ("rsm3", MultinomialMethod::Auto),
        ("rsm3-events", MultinomialMethod::Alias),
        ("rsm3-binomial", MultinomialMethod::ConditionalBinomial),
    ];
    for (i, ((name, method), acc)) in methods.into_iter().zip(sums.iter_mut()).enumerate() {
        let mut r = rng::stream(seed, 3 + i as u64);
        let mut last = vec![];
        let timing = time_draws(repetitions, || {
            add_into(acc, &last);
            last = rsm3_with_method(spectrum, budget, method, &mut r)?.counts;
            Ok(())
        })?;
        add_into(acc, &last);
        push(name, timing);
    }

    let mut r = rng::stream(seed, 6);
    push(
        "rsm4",
        time_draws(repetitions, || {
            let s = rsm3_with_method(spectrum, budget, MultinomialMethod::Auto, &mut r)?;
            rsm4_render(
                RenderSource::Counts(&s),
                &cal,
                DEFAULT_RASTER_SIZE,
                DEFAULT_RASTER_SIZE,
                RasterMode::Histogram,
            )
            .map(drop)
        })?,
    );

    let agreement = if budget.k() == 0 {
        None
    } else {
        let total = spectrum.total_counts() as f64;
        let probs: Vec<f64> = spectrum.counts().iter().map(|&c| c as f64 / total).collect();
        Some(SamplerAgreement {
            draws: repetitions,
            fast: chi_square_gof(&sums[0], &probs)?,
            baseline: chi_square_gof(&sums[1], &probs)?,
            homogeneity: chi_square_homogeneity(&sums[0], &sums[1])?,
        })
    };

    Ok(BenchReport {
        machine: MachineInfo::current(),
        label: spectrum.label().into(),
        budget: budget.k(),
        n_channels: n,
        repetitions,
        rows,
        agreement,
    })
}

//! Random sampling methods: simulate a short measurement of `k` events from
//! a long-measurement spectrum treated as a probability distribution.
//!
//! | method | output | route |
//! |--------|--------|-------|
//! | RSM-1  | [`EventList`] of `k` energies | i.i.d. alias draws |
//! | RSM-2  | [`DownsizedSample`] | per-channel binomial thinning |
//! | RSM-3  | [`DownsizedSample`] summing to `k` | multinomial |
//! | RSM-4  | [`Raster`] | scatter or histogram rendering |

mod batch;
mod multinomial;
mod raster;

pub use batch::{batch_generate, Batch, BatchDumpManifest, LibrarySampler};
pub use multinomial::{AliasTable, ChannelSampler, MultinomialMethod};
pub use raster::{rsm4_render, Raster, RasterMode, RenderSource, DEFAULT_RASTER_SIZE};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::Spectrum;

/// Event budget `k` of one short measurement (the sample count rate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleBudget(pub u64);

impl SampleBudget {
    pub fn k(self) -> u64 {
        self.0
    }
}

/// Count vector of a short measurement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownsizedSample {
    pub counts: Vec<u64>,
    pub budget: SampleBudget,
    pub label: String,
}

impl DownsizedSample {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// RSM-1 output: recorded energies in draw order, with their channels.
#[derive(Debug, Clone, PartialEq)]
pub struct EventList {
    pub channels: Vec<usize>,
    pub energies: Vec<f64>,
}

impl EventList {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Per-channel occurrence counts.
    pub fn histogram(&self, n_channels: usize) -> Vec<u64> {
        let mut h = vec![0; n_channels];
        for &c in &self.channels {
            h[c] += 1;
        }
        h
    }
}

fn check_drawable(s: &Spectrum, budget: SampleBudget) -> Result<()> {
    if budget.k() > 0 && s.total_counts() == 0 {
        return Err(Error::EmptyDistribution { k: budget.k() });
    }
    Ok(())
}

/// RSM-1: `k` energies drawn i.i.d. with probability `counts_i / total`.
pub fn rsm1_event_list<R: Rng + ?Sized>(
    s: &Spectrum,
    budget: SampleBudget,
    rng: &mut R,
) -> Result<EventList> {
    check_drawable(s, budget)?;
    if budget.k() == 0 {
        return Ok(EventList {
            channels: vec![],
            energies: vec![],
        });
    }
    let table = AliasTable::new(s.counts())?;
    let channels: Vec<usize> = (0..budget.k()).map(|_| table.draw(rng)).collect();
    let cal = s.calibration();
    let energies = channels.iter().map(|&c| cal.energy_at(c)).collect();
    Ok(EventList { channels, energies })
}

/// RSM-3: multinomial draw of `k` events, returned as a count vector.
pub fn rsm3_weighted_counts<R: Rng + ?Sized>(
    s: &Spectrum,
    budget: SampleBudget,
    rng: &mut R,
) -> Result<DownsizedSample> {
    rsm3_with_method(s, budget, MultinomialMethod::Auto, rng)
}

pub fn rsm3_with_method<R: Rng + ?Sized>(
    s: &Spectrum,
    budget: SampleBudget,
    method: MultinomialMethod,
    rng: &mut R,
) -> Result<DownsizedSample> {
    check_drawable(s, budget)?;
    let counts = ChannelSampler::new(s.counts())?.multinomial(budget.k(), method, rng)?;
    Ok(DownsizedSample {
        counts,
        budget,
        label: s.label().to_string(),
    })
}

/// Retain fraction that makes RSM-2's expected total equal `budget`.
pub fn retain_fraction_for_budget(s: &Spectrum, budget: SampleBudget) -> Result<f64> {
    check_drawable(s, budget)?;
    if budget.k() == 0 {
        return Ok(0.0);
    }
    Ok((budget.k() as f64 / s.total_counts() as f64).min(1.0))
}

/// RSM-2: every channel independently thinned, `Binomial(counts_i, p)`.
/// The total is random with mean `p * total_counts`.
pub fn rsm2_binomial_thinning<R: Rng + ?Sized>(
    s: &Spectrum,
    retain_fraction: f64,
    rng: &mut R,
) -> Result<DownsizedSample> {
    if !(0.0..=1.0).contains(&retain_fraction) {
        return Err(Error::Range {
            what: "retain fraction",
            value: retain_fraction,
            min: 0.0,
            max: 1.0,
        });
    }
    let counts = s
        .counts()
        .iter()
        .map(|&c| {
            if c == 0 || retain_fraction == 0.0 {
                Ok(0)
            } else if retain_fraction == 1.0 {
                Ok(c)
            } else {
                Binomial::new(c, retain_fraction)
                    .map(|b| b.sample(rng))
                    .map_err(|e| Error::validation(format!("binomial: {e}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let nominal = (retain_fraction * s.total_counts() as f64).round() as u64;
    Ok(DownsizedSample {
        counts,
        budget: SampleBudget(nominal),
        label: s.label().to_string(),
    })
}

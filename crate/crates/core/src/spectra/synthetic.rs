//! Generative stand-in for measured species: Gaussian peaks over an
//! exponential background, realized with Poisson counting noise.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::ChannelCalibration;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// keV
    pub center: f64,
    pub amplitude: f64,
    /// keV
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub level: f64,
    /// per keV
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpeciesSpec {
    pub name: String,
    #[serde(default)]
    pub peaks: Vec<Peak>,
    pub background: Background,
}

impl SyntheticSpeciesSpec {
    pub fn validate(&self, cal: &ChannelCalibration) -> Result<()> {
        let (lo, hi) = cal.energy_range();
        for (i, p) in self.peaks.iter().enumerate() {
            if !(p.sigma > 0.0 && p.sigma.is_finite()) {
                return Err(Error::validation(format!(
                    "{}: peak {i} sigma must be positive",
                    self.name
                )));
            }
            if !(p.amplitude > 0.0 && p.amplitude.is_finite()) {
                return Err(Error::validation(format!(
                    "{}: peak {i} amplitude must be positive",
                    self.name
                )));
            }
            if !(p.center >= lo && p.center <= hi) {
                return Err(Error::validation(format!(
                    "{}: peak {i} centre {} keV outside calibrated range [{lo}, {hi}]",
                    self.name, p.center
                )));
            }
        }
        let bg = self.background;
        if !(bg.level >= 0.0 && bg.level.is_finite()) || !(bg.decay >= 0.0 && bg.decay.is_finite()) {
            return Err(Error::validation(format!(
                "{}: background level and decay must be non-negative",
                self.name
            )));
        }
        if self.peaks.is_empty() && bg.level == 0.0 {
            return Err(Error::validation(format!(
                "{}: species has neither peaks nor background",
                self.name
            )));
        }
        Ok(())
    }

    /// Unnormalized per-channel intensity at channel-centre energies.
    fn shape(&self, cal: &ChannelCalibration) -> Vec<f64> {
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        (0..cal.n_channels())
            .map(|ch| {
                let e = cal.energy_at(ch);
                let peaks: f64 = self
                    .peaks
                    .iter()
                    .map(|p| {
                        let z = (e - p.center) / p.sigma;
                        p.amplitude * cal.gain() * norm / p.sigma * (-0.5 * z * z).exp()
                    })
                    .sum();
                peaks + self.background.level * (-self.background.decay * e).exp()
            })
            .collect()
    }
}

/// Expected counts per channel, scaled so the vector sums to `intensity`.
pub fn synthesize_expected(
    spec: &SyntheticSpeciesSpec,
    cal: &ChannelCalibration,
    intensity: f64,
) -> Result<Vec<f64>> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::validation(format!("intensity must be positive, got {intensity}")));
    }
    spec.validate(cal)?;
    let mut shape = spec.shape(cal);
    let total: f64 = shape.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::validation(format!(
            "{}: expectation vanishes over the calibrated range",
            spec.name
        )));
    }
    let scale = intensity / total;
    shape.iter_mut().for_each(|v| *v *= scale);
    Ok(shape)
}

/// Independent Poisson draw per channel.
pub fn realize_counts<R: Rng + ?Sized>(expected: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    if let Some((i, v)) = expected
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(Error::validation(format!(
            "expectation at channel {i} must be finite and non-negative, got {v}"
        )));
    }
    expected
        .iter()
        .map(|&lambda| {
            if lambda == 0.0 {
                return Ok(0);
            }
            let dist = Poisson::new(lambda)
                .map_err(|e| Error::validation(format!("poisson({lambda}): {e}")))?;
            Ok(dist.sample(rng) as u64)
        })
        .collect()
}

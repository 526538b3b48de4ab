//! Calibrated spectra: the "long measurement" every downstream step samples from.

mod csv_io;
mod library;
mod synthetic;

pub use csv_io::{load_spectrum_csv, read_spectrum_csv, write_spectrum_csv, write_spectrum_csv_to};
pub use library::{load_library, Library, LibraryManifest, SpeciesEntry, SyntheticEntry};
pub use synthetic::{realize_counts, synthesize_expected, Background, Peak, SyntheticSpeciesSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel/energy pairs quoted for the high-energy discard band of the
/// 16384-channel detector.
pub const REFERENCE_POINTS: [(f64, f64); 2] = [(8000.0, 5641.92), (16384.0, 11552.48)];

pub const DEFAULT_CHANNELS: usize = 16384;

/// Affine channel to energy mapping, `E(ch) = offset + gain * ch` in keV.
///
/// `E(ch)` is the nominal (centre) energy of channel `ch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCalibration")]
pub struct ChannelCalibration {
    n_channels: usize,
    gain: f64,
    offset: f64,
}

#[derive(Deserialize)]
struct RawCalibration {
    n_channels: usize,
    gain: f64,
    offset: f64,
}

impl TryFrom<RawCalibration> for ChannelCalibration {
    type Error = Error;

    fn try_from(raw: RawCalibration) -> Result<Self> {
        ChannelCalibration::new(raw.n_channels, raw.gain, raw.offset)
    }
}

impl ChannelCalibration {
    pub fn new(n_channels: usize, gain: f64, offset: f64) -> Result<Self> {
        if n_channels < 2 {
            return Err(Error::validation(format!(
                "calibration needs at least 2 channels, got {n_channels}"
            )));
        }
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::validation(format!("calibration gain must be positive, got {gain}")));
        }
        if !offset.is_finite() {
            return Err(Error::validation("calibration offset must be finite"));
        }
        Ok(Self {
            n_channels,
            gain,
            offset,
        })
    }

    /// Fit the affine map through two `(channel, keV)` points.
    pub fn from_two_points(n_channels: usize, a: (f64, f64), b: (f64, f64)) -> Result<Self> {
        if a.0 == b.0 {
            return Err(Error::validation("calibration points share a channel"));
        }
        let gain = (b.1 - a.1) / (b.0 - a.0);
        let offset = a.1 - gain * a.0;
        Self::new(n_channels, gain, offset)
    }

    /// The 16384-channel detector calibration.
    pub fn pgnaa() -> Self {
        Self::from_two_points(DEFAULT_CHANNELS, REFERENCE_POINTS[0], REFERENCE_POINTS[1])
            .expect("reference calibration is valid")
    }

    /// Same energy span covered with `n_channels` bins (coarser or finer).
    pub fn with_channels(&self, n_channels: usize) -> Result<Self> {
        let gain = self.gain * self.n_channels as f64 / n_channels as f64;
        Self::new(n_channels, gain, self.offset)
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Energy in keV of channel `ch`. `ch == n_channels` is accepted as the
    /// end label of the last bin.
    pub fn energy_of_channel(&self, ch: usize) -> Result<f64> {
        if ch > self.n_channels {
            return Err(Error::Range {
                what: "channel",
                value: ch as f64,
                min: 0.0,
                max: self.n_channels as f64,
            });
        }
        Ok(self.energy_at(ch))
    }

    pub(crate) fn energy_at(&self, ch: usize) -> f64 {
        self.offset + self.gain * ch as f64
    }

    /// Energies of the first and last valid channel.
    pub fn energy_range(&self) -> (f64, f64) {
        (self.energy_at(0), self.energy_at(self.n_channels - 1))
    }

    /// Nearest channel to `energy`, ties rounding down. Energies more than
    /// half a channel outside the valid range are rejected.
    pub fn nearest_channel(&self, energy: f64) -> Result<usize> {
        let x = (energy - self.offset) / self.gain;
        // the lower edge of channel 0 has no channel below to round down to
        let ch = if x == -0.5 { 0.0 } else { (x - 0.5).ceil() };
        if !ch.is_finite() || ch < 0.0 || ch > (self.n_channels - 1) as f64 {
            let (lo, hi) = self.energy_range();
            return Err(Error::Range {
                what: "energy (keV)",
                value: energy,
                min: lo - self.gain / 2.0,
                max: hi + self.gain / 2.0,
            });
        }
        Ok(ch as usize)
    }
}

impl Default for ChannelCalibration {
    fn default() -> Self {
        Self::pgnaa()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Synthetic,
}

/// A full per-channel count vector for one labeled species.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    calibration: ChannelCalibration,
    counts: Vec<u64>,
    label: String,
    total_counts: u64,
    provenance: Provenance,
}

impl Spectrum {
    pub fn new(
        calibration: ChannelCalibration,
        counts: Vec<u64>,
        label: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        if counts.len() != calibration.n_channels() {
            return Err(Error::Shape {
                expected: calibration.n_channels(),
                actual: counts.len(),
            });
        }
        let total_counts = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::validation("total counts overflow u64"))?;
        Ok(Self {
            calibration,
            counts,
            label: label.into(),
            total_counts,
            provenance,
        })
    }

    pub fn calibration(&self) -> &ChannelCalibration {
        &self.calibration
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn total_counts(&self) -> u64 {
        self.total_counts
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_channels(&self) -> usize {
        self.counts.len()
    }
}

/// Detector event rate used to convert counts into live time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DetectorRate(f64);

impl DetectorRate {
    pub fn new(counts_per_second: f64) -> Result<Self> {
        if counts_per_second > 0.0 && counts_per_second.is_finite() {
            Ok(Self(counts_per_second))
        } else {
            Err(Error::validation(format!(
                "detector rate must be positive, got {counts_per_second}"
            )))
        }
    }

    /// Reference rate: 19650 counts in 2.479 s.
    pub fn reference() -> Self {
        Self(7926.58)
    }

    pub fn counts_per_second(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for DetectorRate {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DetectorRate> for f64 {
    fn from(r: DetectorRate) -> f64 {
        r.0
    }
}

/// Live time in seconds needed to record `counts` events at `rate`.
pub fn live_time(counts: u64, rate: DetectorRate) -> f64 {
    counts as f64 / rate.0
}

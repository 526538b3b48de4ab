//! Synthetic species libraries standing in for the measured datasets.
//!
//! Positions and widths are written in channel units and converted through
//! the calibration, so the same library shape works at any detector width.
//! All peaks sit in the lower half of the energy range, leaving the upper
//! band to a decaying background, as in measured spectra.

use crate::spectra::{Background, ChannelCalibration, Peak, SyntheticSpeciesSpec};

fn peak(cal: &ChannelCalibration, frac: f64, sigma_channels: f64, amplitude: f64) -> Peak {
    let n = cal.n_channels() as f64;
    Peak {
        center: cal.offset() + cal.gain() * (frac * n).round(),
        amplitude,
        sigma: sigma_channels * cal.gain(),
    }
}

/// Exponential background holding `share` times the total peak area and
/// decaying by `folds` e-folds across the energy range.
fn background(cal: &ChannelCalibration, total_amplitude: f64, share: f64, folds: f64) -> Background {
    let span = cal.gain() * cal.n_channels() as f64;
    let decay = folds / span;
    // channel sum of level*exp(-decay*E) ~ level*(1-exp(-folds))/(decay*gain), up to exp(-decay*offset)
    let level = share * total_amplitude * decay * cal.gain() / (1.0 - (-folds).exp());
    Background { level, decay }
}

/// `n` species with distinct local peak signatures (widths, doublet spacing,
/// position pattern), trivially separable at moderate budgets.
pub fn well_separated(n: usize, cal: &ChannelCalibration) -> Vec<SyntheticSpeciesSpec> {
    let width = cal.n_channels() as f64;
    // geometry is specified for a 2048-channel detector and scaled
    let s = width / 2048.0;
    (0..n)
        .map(|i| {
            let fi = i as f64;
            let main_sigma = (1.5 + 1.1 * fi) * s;
            let spacing = (10.0 + 4.0 * fi) * s / width;
            let base = 0.06 + 0.022 * fi;
            let peaks = vec![
                peak(cal, base, main_sigma, 1.0),
                peak(cal, 0.05 + base + 0.07, 2.0 * s, 0.6),
                peak(cal, 0.05 + base + 0.07 + spacing, 2.0 * s, 0.6),
                peak(cal, 0.42 - 0.01 * fi, (8.0 - 0.5 * fi).max(1.5) * s, 0.4 + 0.05 * fi),
            ];
            let total: f64 = peaks.iter().map(|p| p.amplitude).sum();
            SyntheticSpeciesSpec {
                name: format!("species-{:02}", i + 1),
                peaks,
                background: background(cal, total, 0.6, 5.0),
            }
        })
        .collect()
}

const BG_SHARE: f64 = 8.0;
const BG_FOLDS: f64 = 1.0;

pub const MAX_ALLOYS: usize = 5;

/// Relative peak-area perturbations (in percent) of the near-identical
/// alloys. Each species differs from every other by 2-10% in some peak.
const ALLOY_SHIFTS: [[f64; 3]; MAX_ALLOYS] = [
    [0.0, 0.0, 0.0],
    [8.0, -4.0, 2.0],
    [-5.0, 7.0, -3.0],
    [3.0, -2.0, 9.0],
    [-6.0, -6.0, -4.0],
];

/// `n <= MAX_ALLOYS` species sharing identical peak positions and widths, differing
/// only in peak amplitudes by a few percent, on a heavy background.
pub fn near_identical(n: usize, cal: &ChannelCalibration, family: &str) -> Vec<SyntheticSpeciesSpec> {
    assert!(n <= MAX_ALLOYS, "at most {MAX_ALLOYS} alloys");
    let s = cal.n_channels() as f64 / 1024.0;
    let layout = [(0.15, 2.0 * s), (0.27, 5.0 * s), (0.38, 9.0 * s)];
    (0..n)
        .map(|i| {
            let peaks: Vec<Peak> = layout
                .iter()
                .zip(ALLOY_SHIFTS[i])
                .map(|(&(frac, sigma), shift)| peak(cal, frac, sigma, 1.0 + shift / 100.0))
                .collect();
            SyntheticSpeciesSpec {
                name: format!("{family}-{}", i + 1),
                peaks,
                // reference amplitude so the background is identical across species
                background: background(cal, 3.0, BG_SHARE, BG_FOLDS),
            }
        })
        .collect()
}

//! Class activation maps from the pooling head, and the channel ranges they
//! suggest dropping.
//!
//! For class `c` the raw map is `M_c(p) = sum_f W[c][f] * F_f(p)` over the
//! last feature maps `F`. Because the head averages `F` before the linear
//! layer, `mean_p M_c(p) == logit_c - bias_c`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{forward, ForwardTrace, ModelConfig, ModelParams};
use crate::spectra::ChannelCalibration;

pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_MIN_RUN: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    /// Interpolated to input resolution.
    pub values: Vec<f64>,
    /// At feature resolution.
    pub raw: Vec<f64>,
    pub class_id: usize,
    pub source_resolution: usize,
}

/// Piecewise-linear resampling that pins both endpoints.
pub fn interpolate(raw: &[f64], width: usize) -> Vec<f64> {
    match (raw.len(), width) {
        (_, 0) => vec![],
        (0, w) => vec![0.0; w],
        (1, w) => vec![raw[0]; w],
        (_, 1) => vec![raw[0]],
        (n, w) => {
            let scale = (n - 1) as f64 / (w - 1) as f64;
            (0..w)
                .map(|i| {
                    if i == w - 1 {
                        return raw[n - 1];
                    }
                    let t = i as f64 * scale;
                    let lo = (t.floor() as usize).min(n - 2);
                    let frac = t - lo as f64;
                    raw[lo] * (1.0 - frac) + raw[lo + 1] * frac
                })
                .collect()
        }
    }
}

pub fn compute_cam(
    params: &ModelParams,
    config: &ModelConfig,
    trace: &ForwardTrace,
    class_id: usize,
) -> Result<ActivationMap> {
    if class_id >= config.n_classes {
        return Err(Error::Index {
            index: class_id,
            len: config.n_classes,
        });
    }
    let filters = config.last_filters();
    let len = trace.feature_len();
    if !params.matches(config) || trace.last_feature_maps().len() != filters * len {
        return Err(Error::validation("trace does not match model"));
    }
    let mut raw = vec![0.0; len];
    for f in 0..filters {
        let w = params.head_weight(class_id, f);
        for (r, v) in raw.iter_mut().zip(trace.feature_map(f)) {
            *r += w * v;
        }
    }
    Ok(ActivationMap {
        values: interpolate(&raw, config.input_width),
        raw,
        class_id,
        source_resolution: len,
    })
}

/// Per-channel importance, max-normalized into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImportance {
    pub scores: Vec<f64>,
}

impl ChannelImportance {
    /// Normalize non-negative raw scores by their maximum.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation("importance scores must be finite and non-negative"));
        }
        let max = raw.iter().copied().fold(0.0, f64::max);
        let scores = if max > 0.0 {
            raw.iter().map(|v| v / max).collect()
        } else {
            vec![0.0; raw.len()]
        };
        Ok(Self { scores })
    }

    pub fn argmax(&self) -> usize {
        crate::nn::argmax(&self.scores)
    }

    /// CSV `channel,energy_keV,score`.
    pub fn write_csv<W: Write>(&self, cal: &ChannelCalibration, mut out: W) -> std::io::Result<()> {
        writeln!(out, "channel,energy_keV,score")?;
        for (ch, s) in self.scores.iter().enumerate() {
            writeln!(out, "{ch},{},{s}", cal.energy_at(ch))?;
        }
        out.flush()
    }
}

/// Mean over samples of `|CAM|` for each sample's true class.
///
/// `inputs` is row-major `labels.len() x input_width`, already normalized.
pub fn aggregate_importance(
    params: &ModelParams,
    config: &ModelConfig,
    inputs: &[f64],
    labels: &[usize],
) -> Result<ChannelImportance> {
    if labels.is_empty() {
        return Err(Error::validation("importance needs at least one sample"));
    }
    if inputs.len() != labels.len() * config.input_width {
        return Err(Error::Shape {
            expected: labels.len() * config.input_width,
            actual: inputs.len(),
        });
    }
    let mut acc = vec![0.0; config.input_width];
    for (row, &label) in inputs.chunks_exact(config.input_width).zip(labels) {
        let trace = forward(params, config, row)?;
        let cam = compute_cam(params, config, &trace, label)?;
        for (a, v) in acc.iter_mut().zip(&cam.values) {
            *a += v.abs();
        }
    }
    let n = labels.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    ChannelImportance::from_raw(&acc)
}

/// Sorted, disjoint, inclusive channel intervals to drop from model input.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, usize)>", into = "Vec<(usize, usize)>")]
pub struct DiscardRanges {
    ranges: Vec<(usize, usize)>,
}

impl TryFrom<Vec<(usize, usize)>> for DiscardRanges {
    type Error = Error;
    fn try_from(v: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiscardRanges> for Vec<(usize, usize)> {
    fn from(d: DiscardRanges) -> Self {
        d.ranges
    }
}

impl DiscardRanges {
    /// Ranges are sorted here; overlapping or inverted ranges are rejected.
    pub fn new(mut ranges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(lo, hi)) = ranges.iter().find(|(lo, hi)| lo > hi) {
            return Err(Error::validation(format!("inverted discard range [{lo}, {hi}]")));
        }
        ranges.sort_unstable();
        if let Some(w) = ranges.windows(2).find(|w| w[1].0 <= w[0].1) {
            return Err(Error::validation(format!(
                "overlapping discard ranges [{}, {}] and [{}, {}]",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        Ok(Self { ranges })
    }

    /// Low band 0..=103 and high band 8000..=16383 of the 16384-channel detector.
    pub fn standard_bands() -> Self {
        Self {
            ranges: vec![(0, 103), (8000, 16383)],
        }
    }

    /// Parse `lo-hi[,lo-hi...]`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() || text.eq_ignore_ascii_case("none") {
            return Ok(Self::default());
        }
        let ranges = text
            .split(',')
            .map(|part| {
                let (lo, hi) = part
                    .trim()
                    .split_once('-')
                    .ok_or_else(|| Error::Config(format!("discard range {part:?} is not lo-hi")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad channel {s:?} in discard range")))
                };
                Ok((parse(lo)?, parse(hi)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ranges)
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn discarded(&self) -> usize {
        self.ranges.iter().map(|(lo, hi)| hi - lo + 1).sum()
    }

    pub fn check_within(&self, width: usize) -> Result<()> {
        match self.ranges.last() {
            Some(&(_, hi)) if hi >= width => Err(Error::Range {
                what: "discard channel",
                value: hi as f64,
                min: 0.0,
                max: width as f64 - 1.0,
            }),
            _ => Ok(()),
        }
    }

    pub fn kept_width(&self, width: usize) -> Result<usize> {
        self.check_within(width)?;
        Ok(width - self.discarded())
    }

    /// Append the kept segments of `v` to `out`, in channel order.
    pub fn extend_kept<T: Copy>(&self, v: &[T], out: &mut Vec<T>) -> Result<()> {
        self.check_within(v.len())?;
        let mut next = 0;
        for &(lo, hi) in &self.ranges {
            out.extend_from_slice(&v[next..lo]);
            next = hi + 1;
        }
        out.extend_from_slice(&v[next..]);
        Ok(())
    }

    /// Sorted union, merging touching or overlapping intervals.
    pub fn union(&self, other: &DiscardRanges) -> DiscardRanges {
        let mut all: Vec<(usize, usize)> = self.ranges.iter().chain(&other.ranges).copied().collect();
        all.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(all.len());
        for (lo, hi) in all {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        DiscardRanges { ranges: merged }
    }

    /// Express `self` (original coordinates, disjoint from `applied`) in the
    /// coordinates of a vector that already had `applied` removed.
    pub fn reindex_after(&self, applied: &DiscardRanges) -> Result<DiscardRanges> {
        let shift = |ch: usize| applied.ranges.iter().filter(|r| r.1 < ch).map(|(lo, hi)| hi - lo + 1).sum::<usize>();
        let mut out = Vec::new();
        for &(lo, hi) in &self.ranges {
            if applied.ranges.iter().any(|&(a, b)| lo <= b && a <= hi) {
                return Err(Error::validation("range sets overlap"));
            }
            out.push((lo - shift(lo), hi - shift(hi)));
        }
        let merged = DiscardRanges::default().union(&DiscardRanges { ranges: out });
        Ok(merged)
    }

    /// CSV `lo,hi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lo,hi")?;
        for (lo, hi) in &self.ranges {
            writeln!(out, "{lo},{hi}")?;
        }
        out.flush()
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut ranges = Vec::new();
        for rec in rdr.deserialize::<(usize, usize)>() {
            ranges.push(rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?);
        }
        Self::new(ranges)
    }
}

/// Concatenation of the kept segments of `v`.
pub fn apply_mask<T: Copy>(v: &[T], ranges: &DiscardRanges) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(v.len().saturating_sub(ranges.discarded()));
    ranges.extend_kept(v, &mut out)?;
    Ok(out)
}

/// Maximal runs of at least `min_run` consecutive channels scoring below
/// `threshold`.
pub fn select_discard_ranges(importance: &ChannelImportance, threshold: f64, min_run: usize) -> DiscardRanges {
    let mut ranges = Vec::new();
    let mut start: Option<usize> = None;
    let n = importance.scores.len();
    for (i, &s) in importance.scores.iter().enumerate() {
        match (s < threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(lo)) => {
                if i - lo >= min_run.max(1) {
                    ranges.push((lo, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        if n - lo >= min_run.max(1) {
            ranges.push((lo, n - 1));
        }
    }
    DiscardRanges { ranges }
}

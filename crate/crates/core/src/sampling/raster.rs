//! RSM-4: render a short measurement into a 2D raster.

use serde::{Deserialize, Serialize};

use super::{DownsizedSample, EventList};
use crate::error::{Error, Result};
use crate::spectra::ChannelCalibration;

pub const DEFAULT_RASTER_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterMode {
    /// RSM-4a: one dot per event, row = event index, column = energy.
    Scatter,
    /// RSM-4b: column heights proportional to binned counts.
    Histogram,
}

#[derive(Debug, Clone, Copy)]
pub enum RenderSource<'a> {
    Events(&'a EventList),
    Counts(&'a DownsizedSample),
}

/// Row-major `height x width` image, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub mode: RasterMode,
    pub pixels: Vec<u8>,
}

impl Raster {
    fn zeros(height: usize, width: usize, mode: RasterMode) -> Self {
        Self {
            height,
            width,
            mode,
            pixels: vec![0; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    fn set(&mut self, row: usize, col: usize) {
        self.pixels[row * self.width + col] = 1;
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.width)
            .map(|c| (0..self.height).map(|r| self.get(r, c) as usize).sum())
            .collect()
    }

    pub fn is_blank(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0)
    }
}

#[inline]
fn column_of(channel: usize, n_channels: usize, width: usize) -> usize {
    channel * width / n_channels
}

pub fn rsm4_render(
    source: RenderSource<'_>,
    cal: &ChannelCalibration,
    height: usize,
    width: usize,
    mode: RasterMode,
) -> Result<Raster> {
    if height == 0 || width == 0 {
        return Err(Error::validation(format!(
            "raster dimensions must be positive, got {height}x{width}"
        )));
    }
    let n = cal.n_channels();
    let channels: Vec<usize> = match source {
        RenderSource::Events(ev) => ev.channels.clone(),
        RenderSource::Counts(s) => {
            if s.counts.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    actual: s.counts.len(),
                });
            }
            s.counts
                .iter()
                .enumerate()
                .flat_map(|(ch, &c)| std::iter::repeat_n(ch, c as usize))
                .collect()
        }
    };
    if let Some(&bad) = channels.iter().find(|&&c| c >= n) {
        return Err(Error::Index { index: bad, len: n });
    }

    let mut raster = Raster::zeros(height, width, mode);
    match mode {
        RasterMode::Scatter => {
            let k = channels.len();
            for (e, &ch) in channels.iter().enumerate() {
                raster.set(e * height / k, column_of(ch, n, width));
            }
        }
        RasterMode::Histogram => {
            let mut bins = vec![0u64; width];
            for &ch in &channels {
                bins[column_of(ch, n, width)] += 1;
            }
            let max = bins.iter().copied().max().unwrap_or(0);
            if max > 0 {
                for (col, &h) in bins.iter().enumerate() {
                    let scaled = (h as u128 * height as u128 / max as u128) as usize;
                    for row in height - scaled..height {
                        raster.set(row, col);
                    }
                }
            }
        }
    }
    Ok(raster)
}

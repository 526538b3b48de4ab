//! Fresh RSM-3 training batches drawn from a species library.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{ChannelSampler, MultinomialMethod, SampleBudget};
use crate::cam::DiscardRanges;
use crate::error::{Error, Result};
use crate::rng::Rng as StreamRng;
use crate::spectra::Library;

/// Row-major `rows x width` count matrix with one class label per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub width: usize,
    pub counts: Vec<u64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.width..(i + 1) * self.width]
    }

    /// Write `<stem>.bin` (little-endian u64, row-major) and `<stem>.json`.
    pub fn write_dump(
        &self,
        dir: &Path,
        stem: &str,
        manifest: &BatchDumpManifest,
    ) -> Result<(PathBuf, PathBuf)> {
        let bin = dir.join(format!("{stem}.bin"));
        let json = dir.join(format!("{stem}.json"));
        let mut bytes = Vec::with_capacity(self.counts.len() * 8);
        for c in &self.counts {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
        let mut f = fs::File::create(&json).map_err(|e| Error::io(&json, e))?;
        let text = serde_json::to_string_pretty(manifest)
            .map_err(|e| Error::validation(format!("batch manifest: {e}")))?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| Error::io(&json, e))?;
        Ok((bin, json))
    }

    pub fn read_dump(bin: &Path, manifest: &BatchDumpManifest) -> Result<Self> {
        let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
        let expected = manifest.rows * manifest.width * 8;
        if bytes.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: bytes.len(),
            });
        }
        let counts = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            width: manifest.width,
            counts,
            labels: manifest.labels.clone(),
        })
    }
}

/// Sidecar describing how a dumped batch was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchDumpManifest {
    pub seed: u64,
    pub budget: SampleBudget,
    pub rows: usize,
    pub width: usize,
    pub discard: DiscardRanges,
    pub labels: Vec<usize>,
    pub species: Vec<String>,
}

/// One prepared multinomial sampler per species.
#[derive(Debug, Clone)]
pub struct LibrarySampler {
    samplers: Vec<ChannelSampler>,
    n_channels: usize,
}

impl LibrarySampler {
    pub fn new(library: &Library) -> Result<Self> {
        let samplers = library
            .species()
            .iter()
            .map(|s| ChannelSampler::new(s.counts()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samplers,
            n_channels: library.n_channels(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.samplers.len()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn output_width(&self, discard: Option<&DiscardRanges>) -> Result<usize> {
        match discard {
            Some(d) => d.kept_width(self.n_channels),
            None => Ok(self.n_channels),
        }
    }

    /// One masked RSM-3 row for `label`, drawn with its own row generator.
    pub fn sample_row<R: Rng + ?Sized>(
        &self,
        label: usize,
        budget: SampleBudget,
        discard: Option<&DiscardRanges>,
        rng: &mut R,
        scratch: &mut Vec<u64>,
        out: &mut Vec<u64>,
    ) -> Result<()> {
        let sampler = self.samplers.get(label).ok_or(Error::Index {
            index: label,
            len: self.samplers.len(),
        })?;
        scratch.clear();
        scratch.resize(self.n_channels, 0);
        sampler.multinomial_into(budget.k(), MultinomialMethod::Auto, rng, scratch)?;
        match discard {
            Some(d) => d.extend_kept(scratch, out)?,
            None => out.extend_from_slice(scratch),
        }
        Ok(())
    }

    /// Class-balanced batch: labels cycle through the species from a random
    /// starting class, so class counts differ by at most one. Each row gets
    /// a seed drawn from `rng`, so rows can be filled independently.
    pub fn batch<R: Rng + ?Sized>(
        &self,
        budget: SampleBudget,
        batch_size: usize,
        rng: &mut R,
        discard: Option<&DiscardRanges>,
    ) -> Result<Batch> {
        let n = self.samplers.len();
        let start = rng.random_range(0..n);
        let plan: Vec<(usize, u64)> = (0..batch_size)
            .map(|i| ((start + i) % n, rng.random::<u64>()))
            .collect();
        self.batch_with_labels(budget, &plan, discard)
    }

    /// Rows with prescribed `(label, row_seed)` pairs.
    pub fn batch_with_labels(
        &self,
        budget: SampleBudget,
        plan: &[(usize, u64)],
        discard: Option<&DiscardRanges>,
    ) -> Result<Batch> {
        let width = self.output_width(discard)?;
        let mut counts = Vec::with_capacity(plan.len() * width);
        let mut scratch = Vec::with_capacity(self.n_channels);
        for &(label, seed) in plan {
            let mut row_rng = StreamRng::seed_from_u64(seed);
            self.sample_row(label, budget, discard, &mut row_rng, &mut scratch, &mut counts)?;
        }
        Ok(Batch {
            width,
            counts,
            labels: plan.iter().map(|p| p.0).collect(),
        })
    }

    /// `per_class` rows of every class, in class order.
    pub fn stratified<R: Rng + ?Sized>(
        &self,
        budget: SampleBudget,
        per_class: usize,
        rng: &mut R,
        discard: Option<&DiscardRanges>,
    ) -> Result<Batch> {
        let plan: Vec<(usize, u64)> = (0..self.samplers.len())
            .flat_map(|c| std::iter::repeat_n(c, per_class))
            .map(|c| (c, rng.random::<u64>()))
            .collect();
        self.batch_with_labels(budget, &plan, discard)
    }
}

pub fn batch_generate<R: Rng + ?Sized>(
    library: &Library,
    budget: SampleBudget,
    batch_size: usize,
    rng: &mut R,
    discard: Option<&DiscardRanges>,
) -> Result<Batch> {
    if batch_size == 0 {
        return Err(Error::validation("batch size must be at least 1"));
    }
    LibrarySampler::new(library)?.batch(budget, batch_size, rng, discard)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::spectra::{ChannelCalibration, Provenance, Spectrum};

    fn library(n_species: usize, n_channels: usize) -> Library {
        let cal = ChannelCalibration::pgnaa().with_channels(n_channels).unwrap();
        let species = (0..n_species)
            .map(|i| {
                let counts = (0..n_channels).map(|c| ((c * 7 + i * 13) % 11) as u64 + 1).collect();
                Spectrum::new(cal, counts, format!("s{i}"), Provenance::Synthetic).unwrap()
            })
            .collect();
        Library::new(species).unwrap()
    }

    #[test]
    fn table_one_batch_shape() {
        let lib = library(12, 16384);
        let b = batch_generate(&lib, SampleBudget(200), 128, &mut seeded(1), None).unwrap();
        assert_eq!(b.rows(), 128);
        assert_eq!(b.width, 16384);
        assert_eq!(b.counts.len(), 128 * 16384);
        assert!(b.labels.iter().all(|&l| l < 12));
        for r in 0..b.rows() {
            assert_eq!(b.row(r).iter().sum::<u64>(), 200);
        }
    }

    #[test]
    fn single_species_labels_are_zero() {
        let lib = library(1, 64);
        let b = batch_generate(&lib, SampleBudget(10), 1, &mut seeded(2), None).unwrap();
        assert_eq!(b.labels, vec![0]);
    }

    #[test]
    fn standard_band_discard_width() {
        let lib = library(2, 16384);
        let d = DiscardRanges::new(vec![(0, 103), (8000, 16383)]).unwrap();
        let b = batch_generate(&lib, SampleBudget(100), 3, &mut seeded(3), Some(&d)).unwrap();
        assert_eq!(b.width, 7896);
        assert_eq!(b.counts.len(), 3 * 7896);
    }

    #[test]
    fn batches_are_deterministic_and_dump_round_trips() {
        let lib = library(3, 256);
        let a = batch_generate(&lib, SampleBudget(500), 8, &mut seeded(4), None).unwrap();
        let b = batch_generate(&lib, SampleBudget(500), 8, &mut seeded(4), None).unwrap();
        assert_eq!(a, b);

        let dir = tempfile::tempdir().unwrap();
        let m = BatchDumpManifest {
            seed: 4,
            budget: SampleBudget(500),
            rows: a.rows(),
            width: a.width,
            discard: DiscardRanges::default(),
            labels: a.labels.clone(),
            species: lib.labels(),
        };
        let (bin, _) = a.write_dump(dir.path(), "batch-0000", &m).unwrap();
        assert_eq!(Batch::read_dump(&bin, &m).unwrap(), a);
    }

    #[test]
    fn zero_batch_size_rejected() {
        let lib = library(2, 16);
        assert!(batch_generate(&lib, SampleBudget(1), 0, &mut seeded(0), None).is_err());
    }
}

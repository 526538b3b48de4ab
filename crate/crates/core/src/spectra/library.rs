use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    load_spectrum_csv, realize_counts, synthesize_expected, Background, ChannelCalibration, Peak,
    Provenance, Spectrum, SyntheticSpeciesSpec,
};
use crate::error::{Error, Result};
use crate::rng;

/// A set of labeled species spectra sharing one calibration. Class index of
/// a species is its position in the library.
#[derive(Debug, Clone, PartialEq)]
pub struct Library {
    calibration: ChannelCalibration,
    species: Vec<Spectrum>,
}

impl Library {
    pub fn new(species: Vec<Spectrum>) -> Result<Self> {
        let first = species
            .first()
            .ok_or_else(|| Error::validation("library has no species"))?;
        let calibration = *first.calibration();
        if let Some(s) = species.iter().find(|s| *s.calibration() != calibration) {
            return Err(Error::validation(format!(
                "species {} uses a different calibration",
                s.label()
            )));
        }
        Ok(Self {
            calibration,
            species,
        })
    }

    /// Realize each synthetic spec at `intensity` total expected counts,
    /// species `i` drawing from stream `i` under `seed`.
    pub fn synthesize(
        specs: &[SyntheticSpeciesSpec],
        cal: &ChannelCalibration,
        intensity: f64,
        seed: u64,
    ) -> Result<Self> {
        let species = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let expected = synthesize_expected(spec, cal, intensity)?;
                let counts = realize_counts(&expected, &mut rng::stream(seed, i as u64))?;
                Spectrum::new(*cal, counts, spec.name.clone(), Provenance::Synthetic)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(species)
    }

    pub fn calibration(&self) -> &ChannelCalibration {
        &self.calibration
    }

    pub fn species(&self) -> &[Spectrum] {
        &self.species
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.species.iter().map(|s| s.label().to_string()).collect()
    }

    pub fn n_channels(&self) -> usize {
        self.calibration.n_channels()
    }
}

/// On-disk species list: each entry is either a measured CSV or an inline
/// synthetic spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryManifest {
    #[serde(default)]
    pub calibration: ChannelCalibration,
    pub species: Vec<SpeciesEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesEntry {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEntry {
    pub peaks: Vec<Peak>,
    pub background: Background,
    pub intensity: f64,
    pub seed: u64,
}

impl LibraryManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("library manifest: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("library manifest: {e}")))
    }

    /// CSV paths that the manifest references, resolved against `base_dir`.
    pub fn csv_paths(&self, base_dir: &Path) -> Vec<PathBuf> {
        self.species
            .iter()
            .filter_map(|e| e.csv.as_ref().map(|p| base_dir.join(p)))
            .collect()
    }

    /// Build the library; relative CSV paths resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Library> {
        if self.species.is_empty() {
            return Err(Error::Config("library manifest lists no species".into()));
        }
        let cal = self.calibration;
        let species = self
            .species
            .iter()
            .map(|entry| match (&entry.csv, &entry.synthetic) {
                (Some(path), None) => {
                    let s = load_spectrum_csv(base_dir.join(path), &cal)?;
                    Spectrum::new(cal, s.counts().to_vec(), entry.label.clone(), Provenance::Measured)
                }
                (None, Some(syn)) => {
                    let spec = SyntheticSpeciesSpec {
                        name: entry.label.clone(),
                        peaks: syn.peaks.clone(),
                        background: syn.background,
                    };
                    let expected = synthesize_expected(&spec, &cal, syn.intensity)?;
                    let counts = realize_counts(&expected, &mut rng::seeded(syn.seed))?;
                    Spectrum::new(cal, counts, entry.label.clone(), Provenance::Synthetic)
                }
                _ => Err(Error::Config(format!(
                    "species {:?} must have exactly one of `csv` or `synthetic`",
                    entry.label
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Library::new(species)
    }
}

/// Read a manifest and load its library relative to the manifest's directory.
pub fn load_library(path: impl AsRef<Path>) -> Result<Library> {
    let path = path.as_ref();
    let manifest = LibraryManifest::read(path)?;
    manifest.load(path.parent().unwrap_or(Path::new(".")))
}

impl Library {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_library(path)
    }
}

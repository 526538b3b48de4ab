use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::Record;
use crate::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex(&Sha256::digest(&bytes)),
        })
    }

    /// Whether the file still has the recorded digest.
    pub fn matches_disk(&self) -> Result<bool> {
        Ok(Self::of(Path::new(&self.path))? == *self)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Started,
    Finished,
}

/// Provenance record of one command invocation, written into its output
/// directory when the run starts and rewritten when it finishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub root_seed: u64,
    /// Effective configuration as TOML.
    pub config: String,
    pub inputs: Vec<FileDigest>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub status: RunStatus,
    #[serde(skip)]
    pub dir: PathBuf,
}

impl RunManifest {
    pub fn start(dir: &Path, command: &str, root_seed: u64, config: &str, inputs: Vec<FileDigest>) -> Result<Self> {
        let m = Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            root_seed,
            config: config.into(),
            inputs,
            outputs: vec![],
            status: RunStatus::Started,
            dir: dir.to_path_buf(),
        };
        m.write()?;
        Ok(m)
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.status = RunStatus::Finished;
        self.dir = dir.to_path_buf();
        self.write()
    }

    fn write(&self) -> Result<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let mut m: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        m.dir = dir.to_path_buf();
        Ok(m)
    }
}

impl Record for RunManifest {
    fn record(&mut self, name: &str) {
        self.outputs.push(name.into());
    }
}

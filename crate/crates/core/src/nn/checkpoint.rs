//! Versioned binary checkpoint.
//!
//! ```text
//! magic   b"PGNAACKP"
//! version u32 LE (= 1)
//! config  u64 LE length + UTF-8 JSON of ModelConfig
//! params  u64 LE count + f64 LE values
//! adam    u8 flag; if 1: u64 step, f64 lr, beta1, beta2, epsilon,
//!         then m and v (params count f64 LE each)
//! ```

use std::fs;
use std::path::Path;

use super::adam::AdamState;
use super::config::ModelConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"PGNAACKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let config = serde_json::to_vec(&self.config)
            .map_err(|e| Error::validation(format!("checkpoint config: {e}")))?;
        let n = self.params.len();
        let mut out = Vec::with_capacity(32 + config.len() + n * 24);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u64).to_le_bytes());
        out.extend_from_slice(&config);
        out.extend_from_slice(&(n as u64).to_le_bytes());
        put_f64s(&mut out, self.params.as_slice());
        match &self.optimizer {
            None => out.push(0),
            Some(s) => {
                out.push(1);
                out.extend_from_slice(&s.step.to_le_bytes());
                put_f64s(&mut out, &[s.lr, s.beta1, s.beta2, s.epsilon]);
                put_f64s(&mut out, &s.m);
                put_f64s(&mut out, &s.v);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::validation("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::validation(format!("unsupported checkpoint version {version}")));
        }
        let len = r.u64()? as usize;
        let config: ModelConfig = serde_json::from_slice(r.take(len)?)
            .map_err(|e| Error::validation(format!("checkpoint config: {e}")))?;
        let n = r.u64()? as usize;
        let params = ModelParams::from_flat(&config, r.f64s(n)?)?;
        let optimizer = match r.take(1)?[0] {
            0 => None,
            1 => {
                let step = r.u64()?;
                let h = r.f64s(4)?;
                Some(AdamState {
                    step,
                    lr: h[0],
                    beta1: h[1],
                    beta2: h[2],
                    epsilon: h[3],
                    m: r.f64s(n)?,
                    v: r.f64s(n)?,
                })
            }
            f => return Err(Error::validation(format!("bad optimizer flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::validation("trailing bytes after checkpoint"));
        }
        Ok(Self {
            config,
            params,
            optimizer,
        })
    }
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::validation("truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::validation("bad length"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

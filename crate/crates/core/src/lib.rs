//! Spectral classification lab for prompt-gamma neutron activation spectra.
//!
//! The crate is organised the way the pipeline runs:
//!
//! - [`spectra`]: calibrated long-measurement spectra, CSV ingestion and a
//!   synthetic species generator with Poisson counting noise.
//! - [`sampling`]: the four random sampling methods (RSM-1..4) that turn a
//!   long measurement into a short one under an event budget `k`.
//! - [`nn`]: a small residual 1D convolutional classifier with a global
//!   average pooling head, trained with Adam.
//! - [`cam`]: class activation maps and the channel ranges they suggest
//!   discarding.
//! - [`experiments`]: end-to-end runs, count-rate sweeps, confusion matrices
//!   and sampler benchmarks.

pub mod cam;
pub mod error;
pub mod experiments;
pub mod nn;
pub mod rng;
pub mod sampling;
pub mod spectra;

pub use error::{Error, Result};

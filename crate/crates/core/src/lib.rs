//! Hyperparameter sweeps of MC-dropout regression networks over noisy polynomials.
//!
//! The crate is organised bottom-up:
//!
//! - [`data_gen`]: seeded polynomial signals plus Gaussian/Exponential/Rayleigh noise at a
//!   target signal-to-noise ratio.
//! - [`nn`]: a from-scratch MLP (1 → w → … → w → 1) with inverted dropout, exact backprop
//!   and a mini-batch trainer (SGD or Adam), plus a bit-exact checkpoint container.
//! - [`ensemble`]: MC-dropout inference and the ensemble error/ambiguity decomposition.
//! - [`metrics`]: L1/L2 norms and the Gaussian Bhattacharyya distance between residuals
//!   and injected noise.
//! - [`sweep`]: grid enumeration, resumable JSONL persistence, landscape export and the
//!   optimal-depth / ensemble-curve analyses.

pub mod config;
pub mod data_gen;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod sweep;

pub use error::{Error, Result};

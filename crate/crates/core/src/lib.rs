//! Simulation and estimation for IRS-assisted bi-static target localization.
//!
//! A single-antenna user transmits OFDM pilots, targets scatter the signal onto
//! an intelligent reflecting surface (IRS), and a multi-antenna base station
//! (BS) receives the reflected echoes. The crate covers the whole chain:
//!
//! * [`geometry`]: scene layout, array manifolds, ranges and angles
//! * [`channel`]: ground-truth channel synthesis and range clustering
//! * [`ofdm`]: pilots, received-signal synthesis and the delay manifold
//! * [`estimation`]: group-LASSO recovery of the sparse channel impulse response
//! * [`subspace`]: IRS pattern design, virtual channels, AIC and MUSIC
//! * [`localize`]: Cartesian positions from range and angle estimates
//! * [`harness`]: Monte Carlo trials, S-OMP baseline, metrics and sweeps

pub mod channel;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod localize;
pub mod ofdm;
pub mod rng;
pub mod subspace;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Propagation speed (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

//! Simulation and analysis toolkit for a doubly resonant, type-II,
//! frequency-degenerate optical parametric oscillator.
//!
//! The crate is organised by physical subsystem:
//!
//! * [`crystal`]: linearized optical path of the birefringent crystal.
//! * [`cavity`]: resonances, mode clusters, tuning coefficients and waists.
//! * [`servo`]: time-domain noise and dither-lock simulation.
//! * [`detection`]: twin-beam detection chain and spectral estimators.
//! * [`efficiency`]: above-threshold conversion efficiency and its fit.
//!
//! Batch workloads (seed sweeps, calibration probes, analyzer sweeps, Welch
//! segments) accept an [`Execution`] policy. With the default `parallel`
//! feature they fan out over rayon; without it every policy runs sequentially.

pub mod cavity;
pub mod crystal;
pub mod detection;
pub mod efficiency;
mod error;
mod exec;
pub mod lsq;
pub mod noise;
pub mod series;
pub mod servo;

pub use error::{Error, Result};
pub use exec::Execution;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Deterministic RNG used throughout the crate. ChaCha is portable across
/// platforms, so a seed gives bit-identical streams everywhere.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the crate RNG from a seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

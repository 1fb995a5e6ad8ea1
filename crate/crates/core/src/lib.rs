//! Bayesian reconstruction of depth, intensity and background from
//! photon-starved time-correlated single photon counting (TCSPC) Lidar cubes.
//!
//! The crate is organised bottom-up:
//!
//! * [`cube`], [`irf`], [`fields`], [`maps`]: domain types and file formats.
//! * [`model`], [`neighborhood`]: likelihood, priors and lattice structure.
//! * [`gamma_mixture`]: closed-form intensity/background conditionals.
//! * [`sampler`]: the adaptive Gibbs sampler with hyperparameter estimation.
//! * [`inference`]: MMSE / MAP estimators and MSE / cdf metrics.
//! * [`baseline`]: cross-correlation depth and ML intensity.
//! * [`simulator`]: synthetic scenes and Poisson cubes.

pub mod baseline;
pub mod cube;
pub mod error;
pub mod fields;
pub mod gamma_mixture;
pub mod grid;
pub mod inference;
pub mod irf;
pub mod maps;
pub mod math;
pub mod model;
pub mod neighborhood;
pub mod rng;
pub mod sampler;
pub mod simulator;

pub use cube::PhotonCube;
pub use error::{Error, Result};
pub use fields::{FieldSet, HyperState, SamplerConfig};
pub use grid::Grid;
pub use inference::ChainTrace;
pub use irf::ImpulseResponse;
pub use neighborhood::{GmrfEdges, NeighborhoodSpec};

/// Speed of light used for bin-to-distance conversion (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Converts a time-of-flight bin index to a one-way distance in meters.
///
/// `d = c * (t * bin_width) / 2`, with the bin width given in picoseconds.
pub fn bin_to_distance(t: f64, bin_width_ps: f64) -> f64 {
    SPEED_OF_LIGHT * (t * bin_width_ps * 1e-12) / 2.0
}

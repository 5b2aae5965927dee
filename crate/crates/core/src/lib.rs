//! Signed two-dimensional Coulomb particle systems.
//!
//! Particles carry a fixed sign `b ∈ {−1, +1}`; equal signs repel and
//! opposite signs attract through the kernel `K(x) = x/|x|²`. The crate
//! provides
//!
//! * [`model`]: configurations, kernels, the same-sign cutoff and the drift field,
//! * [`sde`]: reproducible Euler–Maruyama integration of the regularized system,
//! * [`bessel`]: squared Bessel processes and the two-particle reduction,
//! * [`estimators`]: batch Monte Carlo and the statistics built on it,
//! * [`meanfield`]: empirical densities, a spectral solver for the two-species
//!   limit equation, the weak-form residual and a bounded-Lipschitz distance,
//! * [`io`]: CSV and binary exports shared by the command-line runner.

pub mod bessel;
pub mod error;
pub mod estimators;
pub mod io;
pub mod meanfield;
pub mod model;
pub mod noise;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use model::{DistanceMode, Sign, SignedConfiguration, SystemParams, Vec2};
pub use noise::NoiseStream;

/// Version tag of the noise generator layout. Bumped whenever the mapping
/// from `(seed, stream, lane, draw)` to numbers changes.
pub const GENERATOR_VERSION: &str = "chacha8-ziggurat-v1";

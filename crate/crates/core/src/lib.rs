//! Covariant quantum time observables at desk scale.
//!
//! The library builds discrete realizations of covariant time-distribution
//! kernels: the general channel-function construction with its moments and
//! Schmidt decomposition, the generalized Kijowski free-particle arrival
//! distribution in one dimension and at a plane in three, the unique
//! minimal-variance clock kernels for symmetric 1D and spherical scattering
//! systems, and conditional / operator-normalized first-arrival distributions
//! for particles detected by a complex absorbing potential.
//!
//! States live on momentum quadrature grids ([`state::WavePacket`]) or in the
//! energy-channel representation ([`state::EnergyChannels`]); distributions
//! are sampled on uniform time grids ([`state::TimeDistribution`]).
//!
//! With the default `parallel` feature the heavy inner loops (time grids,
//! transverse nodes, channel sums) run on rayon; disabling the feature gives
//! a bit-identical sequential build (summation order is fixed either way).

pub mod conditional;
pub mod error;
pub mod freearrival;
pub mod kernelcore;
mod par;
pub mod partialwave3d;
pub mod scatter1d;
pub mod state;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

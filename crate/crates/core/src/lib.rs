//! Discrete Kontsevich-Zorich cocycle over Rauzy-Veech-Zorich induction.
//!
//! * [`iet`]: interval exchanges, permutations and their strata.
//! * [`rauzy`]: Rauzy-Veech steps, Zorich blocks and the integer cocycle.
//! * [`lyapunov`]: Lyapunov spectrum of the cocycle, normalized so that
//!   `λ₁ = 1`.
//! * [`deviation`]: Birkhoff sums along exchange orbits and their
//!   projections onto Oseledec subspaces.
//! * [`boundary`]: Hodge-form eigenvalues on a sphere with paired
//!   punctures, as the pinching parameters go to zero.
//!
//! Batches (seeds, orbits, quadrature cells) run on rayon when the
//! `parallel` feature is enabled; see [`exec::Execution`].

pub mod boundary;
pub mod deviation;
pub mod error;
pub mod exec;
pub mod iet;
pub mod linalg;
pub mod lyapunov;
pub mod rauzy;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
pub use iet::{stratum_of, Iet, Permutation, StratumSignature};

//! Hodge-form data on a sphere with paired punctures.
//!
//! Each pair `(p1, p2)` carries the form `θ = (p1 − p2)/(2πi (z − p1)(z − p2))`
//! and is truncated by cutting out disks of radius `|t|^{1/2}`. The
//! quadratic differential `q₀ = −s²`, `s = Σ r_k θ_k`, fixes the phase
//! `|q₀|/q₀` in `B_phi`; `G` is the Gram matrix of the `θ_k`. The
//! eigenvalues `Λ_i` of `B̄_m B_m` with `B_m = C⁻¹ B_phi (Cᵀ)⁻¹`, `C C* = G`,
//! are tracked along a schedule of decreasing `|t|`.

pub mod family;
pub mod lambda;
pub mod quadrature;
pub mod sweep;

pub use family::{q0_from_weights, theta_basis, FamilySpec, PinchingFamily, QuadraticDifferential, ThetaForm};
pub use lambda::{hermitian_sqrt, lambda_eigs, lambda_raw, lambda_with_root, LambdaSpectrum};
pub use quadrature::{b_integral, boundary_matrices, gram_integral, BoundaryMatrices, Estimate, QuadratureOptions};
pub use sweep::{degeneration_sweep, is_monotone_within_errors, log_law_limit, sweep_csv, LogLawLimit, SweepRow};

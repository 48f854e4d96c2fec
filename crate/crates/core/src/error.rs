use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("symbol orders are not bijections of 1..=d: {0}")]
    NotBijection(String),
    #[error("permutation is reducible: the first {prefix} symbols of top and bottom coincide as sets")]
    Reducible { prefix: usize },
    #[error("point {x} lies on the interior breakpoint {breakpoint}")]
    OnDiscontinuity { x: f64, breakpoint: usize },
    #[error("orbit hit a discontinuity at iterate {index}")]
    HitDiscontinuity { index: u64 },
    #[error("Rauzy induction tie at step {step}: last top and bottom lengths are equal")]
    Tie { step: u64 },
    #[error("length {value:e} fell below the degeneracy floor at step {step}")]
    DegenerateLength { step: u64, value: f64 },
    #[error("estimate did not converge: stderr {stderr:e} exceeds bound {bound:e}")]
    NonConvergence { stderr: f64, bound: f64 },
    #[error("fit window too short: {decades:.2} decades available, {required:.2} required")]
    WindowTooShort { decades: f64, required: f64 },
    #[error("Oseledec clusters are ill-conditioned: minimal angle {angle:e}")]
    IllConditioned { angle: f64 },
    #[error("weights cancel the pole at puncture {puncture}")]
    SpuriousZeroAtPuncture { puncture: usize },
    #[error("quadrature budget exceeded: partial value {partial_re}+{partial_im}i, error bound {bound:e}")]
    QuadratureBudgetExceeded { partial_re: f64, partial_im: f64, bound: f64 },
    #[error("Gram matrix is not positive definite (smallest eigenvalue {min_eig:e})")]
    SingularGram { min_eig: f64 },
    #[error("eigenvalue {value} overshoots 1 beyond the quadrature tolerance {tolerance:e}")]
    EigenvalueOvershoot { value: f64, tolerance: f64 },
    #[error("invalid pinching family: {0}")]
    InvalidFamily(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

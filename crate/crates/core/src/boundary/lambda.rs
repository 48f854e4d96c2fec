//! Eigenvalues `Λ_i` of `H = B̄_m B_m` from `B_phi` and the Gram matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest relative Gram eigenvalue accepted.
const GRAM_FLOOR: f64 = 1e-13;

/// The positive Hermitian square root `C` of `G` (`C C* = G`).
pub fn hermitian_sqrt(g: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = g.nrows();
    // symmetrize against rounding before the Hermitian solver
    let herm = (g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min > GRAM_FLOOR * max) {
        return Err(Error::SingularGram { min_eig: min });
    }
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| Complex64::new(v.sqrt(), 0.0)));
    let u = &eig.eigenvectors;
    let c = u * roots * u.adjoint();
    debug_assert_eq!(c.nrows(), n);
    Ok(c)
}

/// `Λ` from a given square root `C` of `G`: squared singular values of
/// `C⁻¹ B (Cᵀ)⁻¹`, descending, unclipped.
pub fn lambda_with_root(b: &DMatrix<Complex64>, c: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let ci = c
        .clone()
        .try_inverse()
        .ok_or(Error::SingularGram { min_eig: 0.0 })?;
    let bm = &ci * b * ci.transpose();
    let mut v: Vec<f64> = bm.singular_values().iter().map(|s| s * s).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Unclipped `Λ`, descending.
pub fn lambda_raw(b: &DMatrix<Complex64>, g: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    lambda_with_root(b, &hermitian_sqrt(g)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSpectrum {
    /// `Λ_1 ≥ … ≥ Λ_g`.
    pub values: Vec<f64>,
    /// Set where a value in `(1, 1 + 10·tolerance]` was reported as 1.
    pub clipped: Vec<bool>,
}

impl LambdaSpectrum {
    pub fn product(&self) -> f64 {
        self.values.iter().product()
    }
}

/// `Λ_i`, with values up to `1 + 10·tolerance` reported as 1 (flagged) and
/// larger overshoots rejected.
pub fn lambda_eigs(b: &DMatrix<Complex64>, g: &DMatrix<Complex64>, tolerance: f64) -> Result<LambdaSpectrum> {
    let raw = lambda_raw(b, g)?;
    let mut values = Vec::with_capacity(raw.len());
    let mut clipped = Vec::with_capacity(raw.len());
    for v in raw {
        if v > 1.0 + 10.0 * tolerance {
            return Err(Error::EigenvalueOvershoot { value: v, tolerance });
        }
        clipped.push(v > 1.0);
        values.push(v.min(1.0));
    }
    Ok(LambdaSpectrum { values, clipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_form_gives_ones() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(0.5, 0.0)]));
        let l = lambda_eigs(&g, &g, 1e-12).unwrap();
        assert!(l.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_form_gives_zeros() {
        let g = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.3, 0.1), c(0.3, -0.1), c(1.0, 0.0)]);
        let l = lambda_eigs(&DMatrix::zeros(2, 2), &g, 1e-12).unwrap();
        assert_eq!(l.values, vec![0.0, 0.0]);
    }

    #[test]
    fn singular_gram_is_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            lambda_raw(&g, &g),
            Err(Error::SingularGram { .. })
        ));
    }

    #[test]
    fn overshoot_is_clipped_or_rejected() {
        let g = DMatrix::identity(1, 1);
        let b = DMatrix::from_element(1, 1, c(1.0 + 1e-9, 0.0));
        let l = lambda_eigs(&b, &g, 1e-9).unwrap();
        assert_eq!(l.values, vec![1.0]);
        assert_eq!(l.clipped, vec![true]);
        let b = DMatrix::from_element(1, 1, c(1.1, 0.0));
        assert!(matches!(
            lambda_eigs(&b, &g, 1e-9),
            Err(Error::EigenvalueOvershoot { .. })
        ));
    }
}

//! Punctured-sphere data: paired punctures, residue weights, truncation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `2g` punctures in `g` ordered pairs, one nonzero weight per pair and a
/// truncation parameter `t_i` per pair; the disk of radius `|t_i|^{1/2}`
/// around each puncture of pair `i` is cut out.
#[derive(Debug, Clone, PartialEq)]
pub struct PinchingFamily {
    pairs: Vec<(Complex64, Complex64)>,
    weights: Vec<f64>,
    truncation: Vec<f64>,
}

/// JSON layout: punctures as `[[re, im], [re, im]]` per pair, weights,
/// and a schedule of common `|t|` values for sweeps. `truncation` is
/// optional and defaults to the first schedule entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub punctures: Vec<[[f64; 2]; 2]>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: Vec<f64>,
}

impl FamilySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidFamily(e.to_string()))
    }

    pub fn family(&self) -> Result<PinchingFamily> {
        let pairs = self
            .punctures
            .iter()
            .map(|[a, b]| (Complex64::new(a[0], a[1]), Complex64::new(b[0], b[1])))
            .collect();
        let truncation = match (&self.truncation, self.schedule.first()) {
            (Some(t), _) => t.clone(),
            (None, Some(&t)) => vec![t; self.punctures.len()],
            (None, None) => {
                return Err(Error::InvalidFamily(
                    "family needs a truncation or a schedule".into(),
                ))
            }
        };
        PinchingFamily::new(pairs, self.weights.clone(), truncation)
    }

    /// Checks every schedule entry against the geometry, naming the first
    /// offending pair.
    pub fn validate_schedule(&self) -> Result<()> {
        if self.schedule.windows(2).any(|w| !(w[1].abs() < w[0].abs())) {
            return Err(Error::InvalidFamily(
                "schedule must be strictly decreasing in |t|".into(),
            ));
        }
        let base = self.family()?;
        for &t in &self.schedule {
            base.with_truncation(t)?;
        }
        Ok(())
    }
}

impl PinchingFamily {
    pub fn new(pairs: Vec<(Complex64, Complex64)>, weights: Vec<f64>, truncation: Vec<f64>) -> Result<Self> {
        let g = pairs.len();
        if g == 0 {
            return Err(Error::InvalidFamily("no puncture pairs".into()));
        }
        if weights.len() != g || truncation.len() != g {
            return Err(Error::InvalidFamily(format!(
                "{g} pairs but {} weights and {} truncations",
                weights.len(),
                truncation.len()
            )));
        }
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
                return Err(Error::InvalidFamily(format!("pair {} is not finite", i + 1)));
            }
        }
        for (i, &r) in weights.iter().enumerate() {
            if !(r != 0.0 && r.is_finite()) {
                return Err(Error::InvalidFamily(format!("pair {}: weight must be nonzero", i + 1)));
            }
        }
        for (i, &t) in truncation.iter().enumerate() {
            if !(t.abs() > 0.0 && t.abs() < 1.0) {
                return Err(Error::InvalidFamily(format!(
                    "pair {}: need 0 < |t| < 1, got {t}",
                    i + 1
                )));
            }
        }
        let family = PinchingFamily {
            pairs,
            weights,
            truncation,
        };
        family.check_disks()?;
        Ok(family)
    }

    fn check_disks(&self) -> Result<()> {
        let pts: Vec<(usize, Complex64, f64)> = self
            .pairs
            .iter()
            .enumerate()
            .flat_map(|(i, &(a, b))| {
                let eps = self.truncation[i].abs().sqrt();
                [(i, a, eps), (i, b, eps)]
            })
            .collect();
        for x in 0..pts.len() {
            for y in x + 1..pts.len() {
                let (i, p, e) = pts[x];
                let (j, q, f) = pts[y];
                let dist = (p - q).norm();
                if dist == 0.0 {
                    return Err(Error::InvalidFamily(format!(
                        "pairs {} and {} share a puncture",
                        i + 1,
                        j + 1
                    )));
                }
                // disjoint disks, and no disk reaching another puncture
                if dist <= e + f || dist <= e.max(f) {
                    return Err(if i == j {
                        Error::InvalidFamily(format!("disks of pair {} overlap", i + 1))
                    } else {
                        Error::InvalidFamily(format!("disks of pairs {} and {} overlap", i + 1, j + 1))
                    });
                }
            }
        }
        Ok(())
    }

    pub fn genus(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(Complex64, Complex64)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn truncation(&self) -> &[f64] {
        &self.truncation
    }

    /// Cut-out radius `|t_i|^{1/2}` of pair `i`.
    pub fn disk_radius(&self, i: usize) -> f64 {
        self.truncation[i].abs().sqrt()
    }

    /// Same punctures and weights, every `t_i = t`.
    pub fn with_truncation(&self, t: f64) -> Result<Self> {
        Self::new(self.pairs.clone(), self.weights.clone(), vec![t; self.genus()])
    }

    /// All punctures moved by `shift[k]` (`2g` entries, pair-major order).
    pub fn perturbed(&self, shift: &[Complex64]) -> Result<Self> {
        assert_eq!(shift.len(), 2 * self.genus());
        let pairs = self
            .pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (a + shift[2 * i], b + shift[2 * i + 1]))
            .collect();
        Self::new(pairs, self.weights.clone(), self.truncation.clone())
    }

    pub fn punctures(&self) -> Vec<Complex64> {
        self.pairs.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn to_spec(&self, schedule: Vec<f64>) -> FamilySpec {
        FamilySpec {
            punctures: self
                .pairs
                .iter()
                .map(|&(a, b)| [[a.re, a.im], [b.re, b.im]])
                .collect(),
            weights: self.weights.clone(),
            truncation: Some(self.truncation.clone()),
            schedule,
        }
    }
}

/// `θ = c · dz / ((z − p₁)(z − p₂))` with `c = (p₁ − p₂)/(2πi)`: the
/// normalized third-kind differential of a puncture pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaForm {
    pub p1: Complex64,
    pub p2: Complex64,
    pub coefficient: Complex64,
}

impl ThetaForm {
    pub fn new(p1: Complex64, p2: Complex64) -> Self {
        ThetaForm {
            p1,
            p2,
            coefficient: (p1 - p2) / Complex64::new(0.0, 2.0 * PI),
        }
    }

    /// Coefficient of `dz` at `z`.
    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficient / ((z - self.p1) * (z - self.p2))
    }

    /// Residues at `p₁` and `p₂`.
    pub fn residues(&self) -> (Complex64, Complex64) {
        (
            self.coefficient / (self.p1 - self.p2),
            self.coefficient / (self.p2 - self.p1),
        )
    }

    /// `∮ θ` over the circle `|z − center| = radius`, counter-clockwise,
    /// by the trapezoid rule with `n` nodes.
    pub fn contour_integral(&self, center: Complex64, radius: f64, n: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let e = Complex64::from_polar(1.0, phi);
            // dz = i r e^{iφ} dφ
            acc += self.eval(center + radius * e) * Complex64::new(0.0, radius) * e;
        }
        acc * (2.0 * PI / n as f64)
    }
}

pub fn theta_basis(family: &PinchingFamily) -> Vec<ThetaForm> {
    family.pairs.iter().map(|&(a, b)| ThetaForm::new(a, b)).collect()
}

/// `q₀ = −s(z)² dz²` with `s = Σ r_k θ_k / dz = N(z) / Π (z − p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDifferential {
    pub theta: Vec<ThetaForm>,
    pub weights: Vec<f64>,
    /// Coefficients of `N`, constant term first (degree ≤ 2g − 2).
    pub numerator: Vec<Complex64>,
    /// Finite zeros of `s` (double zeros of `q₀`).
    pub zeros: Vec<Complex64>,
    /// Punctures, pair-major order.
    pub poles: Vec<Complex64>,
    /// Coefficient of `dz²/(z − p)²` at each pole.
    pub residues: Vec<Complex64>,
}

/// Relative size below which a residue of `s` counts as cancelled.
const CANCELLATION: f64 = 1e-12;

pub fn q0_from_weights(family: &PinchingFamily) -> Result<QuadraticDifferential> {
    let theta = theta_basis(family);
    let weights = family.weights.clone();
    let poles = family.punctures();

    // N(z) = Σ_k r_k c_k Π_{l≠k} (z − p_l¹)(z − p_l²)
    let mut numerator = vec![Complex64::new(0.0, 0.0)];
    for (k, th) in theta.iter().enumerate() {
        let mut term = vec![th.coefficient * weights[k]];
        for (l, other) in theta.iter().enumerate() {
            if l != k {
                term = poly_mul(&term, &[other.p1 * other.p2, -(other.p1 + other.p2), Complex64::new(1.0, 0.0)]);
            }
        }
        numerator = poly_add(&numerator, &term);
    }
    let scale = numerator.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    while numerator.len() > 1 && numerator.last().unwrap().norm() <= 1e-14 * scale {
        numerator.pop();
    }

    let mut residues = Vec::with_capacity(poles.len());
    let mut res_scale = 0.0f64;
    let mut s_res = Vec::with_capacity(poles.len());
    for (k, &p) in poles.iter().enumerate() {
        let mut denom = Complex64::new(1.0, 0.0);
        for (l, &q) in poles.iter().enumerate() {
            if l != k {
                denom *= p - q;
            }
        }
        let r = poly_eval(&numerator, p) / denom;
        res_scale = res_scale.max(weights[k / 2].abs() / (2.0 * PI));
        s_res.push(r);
    }
    for (k, r) in s_res.iter().enumerate() {
        if r.norm() <= CANCELLATION * res_scale {
            return Err(Error::SpuriousZeroAtPuncture { puncture: k });
        }
        residues.push(-(r * r));
    }
    let zeros = poly_roots(&numerator);
    Ok(QuadraticDifferential {
        theta,
        weights,
        numerator,
        zeros,
        poles,
        residues,
    })
}

impl QuadraticDifferential {
    /// `s(z)`, the square root `q₀ = −s² dz²` uses.
    #[inline]
    pub fn s(&self, z: Complex64) -> Complex64 {
        self.theta
            .iter()
            .zip(&self.weights)
            .map(|(t, &r)| t.eval(z) * r)
            .sum()
    }

    /// Coefficient of `dz²` at `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let s = self.s(z);
        -(s * s)
    }

    /// Degree of `q₀` at infinity: `q₀ = O(z^{-order})`.
    pub fn decay_order(&self) -> usize {
        2 * (2 * self.theta.len() - (self.numerator.len() - 1))
    }
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or_default() + b.get(i).copied().unwrap_or_default())
        .collect()
}

fn poly_eval(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// All roots of a polynomial (constant term first) by Aberth iteration.
pub(crate) fn poly_roots(c: &[Complex64]) -> Vec<Complex64> {
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|x| x / lead).collect();
    let deriv: Vec<Complex64> = (1..=n).map(|k| monic[k] * k as f64).collect();
    // Cauchy bound for the starting circle
    let radius = 1.0 + monic[..n].iter().fold(0.0f64, |m, x| m.max(x.norm()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..n {
            let p = poly_eval(&monic, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / poly_eval(&deriv, z[k]);
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| Complex64::new(1.0, 0.0) / (z[k] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[k] -= step;
            moved = moved.max(step.norm() / z[k].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    z
}

//! Quadrature of the boundary integrals over the truncated sphere.
//!
//! The plane is split by a smooth partition of unity: a polar patch around
//! every puncture and every zero of `s`, a polar disk `|z| < R` for the
//! rest, and the chart `w = 1/z` for `|z| > R`. In each piece the
//! integrand is smooth in the polar variables, so composite Gauss-Legendre
//! in the radius and the trapezoid rule in the angle converge fast. Each
//! level halves every step; the difference between consecutive levels is
//! the error bar.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::family::{q0_from_weights, PinchingFamily, QuadraticDifferential};
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// First refinement level compared.
    pub level: u32,
    /// Give up past this level.
    pub max_level: u32,
    /// Accept when every entry's level difference is below
    /// `tolerance · max(1, |entry|)`.
    pub tolerance: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            level: 0,
            max_level: 4,
            tolerance: 1e-6,
        }
    }
}

impl QuadratureOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        QuadratureOptions {
            tolerance,
            ..Self::default()
        }
    }
}

/// A value with its refinement error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub re: f64,
    pub im: f64,
    pub error: f64,
}

impl Estimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `B_phi` and `G` at one truncation, at the accepted level and the one
/// below it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrices {
    pub truncation: Vec<f64>,
    pub b_phi: DMatrix<Complex64>,
    pub gram: DMatrix<Complex64>,
    pub b_coarse: DMatrix<Complex64>,
    pub gram_coarse: DMatrix<Complex64>,
    /// Entrywise `|fine − coarse|`.
    pub b_error: DMatrix<f64>,
    pub gram_error: DMatrix<f64>,
    pub level: u32,
}

/// `∫_{M₀(t)} θ_i θ_j |q₀|/q₀` (an area integral on the truncated sphere).
pub fn b_integral(family: &PinchingFamily, i: usize, j: usize, options: &QuadratureOptions) -> Result<Estimate> {
    let m = boundary_matrices(family, options, Execution::default())?;
    Ok(entry(&m.b_phi, &m.b_error, i, j))
}

/// `(i/2) ∫_{M₀(t)} θ_i ∧ θ̄_j`.
pub fn gram_integral(family: &PinchingFamily, i: usize, j: usize, options: &QuadratureOptions) -> Result<Estimate> {
    let m = boundary_matrices(family, options, Execution::default())?;
    Ok(entry(&m.gram, &m.gram_error, i, j))
}

fn entry(v: &DMatrix<Complex64>, e: &DMatrix<f64>, i: usize, j: usize) -> Estimate {
    Estimate {
        re: v[(i, j)].re,
        im: v[(i, j)].im,
        error: e[(i, j)],
    }
}

/// Both matrices, refined until consecutive levels agree to the tolerance.
pub fn boundary_matrices(family: &PinchingFamily, options: &QuadratureOptions, exec: Execution) -> Result<BoundaryMatrices> {
    let layout = Layout::new(family)?;
    let mut level = options.level;
    let (mut b_prev, mut g_prev) = layout.integrate(level, exec);
    loop {
        level += 1;
        let (b, g) = layout.integrate(level, exec);
        let b_error = b.zip_map(&b_prev, |x, y| (x - y).norm());
        let gram_error = g.zip_map(&g_prev, |x, y| (x - y).norm());
        let mut worst = (0.0f64, Complex64::new(0.0, 0.0), 0.0);
        for (vals, errs) in [(&b, &b_error), (&g, &gram_error)] {
            for (v, e) in vals.iter().zip(errs.iter()) {
                let excess = e / (options.tolerance * v.norm().max(1.0));
                if excess > worst.0 {
                    worst = (excess, *v, *e);
                }
            }
        }
        if worst.0 <= 1.0 {
            return Ok(BoundaryMatrices {
                truncation: family.truncation().to_vec(),
                b_phi: b,
                gram: g,
                b_coarse: b_prev,
                gram_coarse: g_prev,
                b_error,
                gram_error,
                level,
            });
        }
        if level >= options.max_level {
            return Err(Error::QuadratureBudgetExceeded {
                partial_re: worst.1.re,
                partial_im: worst.1.im,
                bound: worst.2,
            });
        }
        b_prev = b;
        g_prev = g;
    }
}

/// Gauss-Legendre nodes per radial panel.
const GAUSS_NODES: usize = 8;
/// Patch radius as a fraction of the distance to the nearest other feature.
const PATCH_FRACTION: f64 = 0.45;
/// Inner cut for patches around zeros of `s`, relative to the patch radius.
const ZERO_PATCH_INNER: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Patch {
    center: Complex64,
    /// Cut-out radius (punctures) or a negligible inner radius (zeros).
    inner: f64,
    /// Bump support radius; the bump is 1 inside `outer / 2`.
    outer: f64,
}

#[derive(Debug, Clone)]
struct Layout {
    q: QuadraticDifferential,
    patches: Vec<Patch>,
    /// Radius where the chart at infinity takes over.
    chart_radius: f64,
    /// Smallest bump plateau radius, which sets the bulk resolution.
    min_plateau: f64,
    g: usize,
}

/// Smooth step: 1 on `[0, 1/2]`, 0 on `[1, ∞)`.
#[inline]
fn bump(x: f64) -> f64 {
    if x <= 0.5 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let u = 2.0 * x - 1.0;
        let a = (-1.0 / (1.0 - u)).exp();
        let b = (-1.0 / u).exp();
        a / (a + b)
    }
}

impl Layout {
    fn new(family: &PinchingFamily) -> Result<Self> {
        let q = q0_from_weights(family)?;
        let mut centers: Vec<(Complex64, Option<usize>)> = family
            .punctures()
            .into_iter()
            .enumerate()
            .map(|(k, p)| (p, Some(k / 2)))
            .collect();
        centers.extend(q.zeros.iter().map(|&z| (z, None)));
        let mut patches = Vec::with_capacity(centers.len());
        for (k, &(c, pair)) in centers.iter().enumerate() {
            let nearest = centers
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, &(o, _))| (o - c).norm())
                .fold(f64::INFINITY, f64::min);
            let outer = PATCH_FRACTION * nearest;
            let inner = match pair {
                Some(i) => family.disk_radius(i),
                None => ZERO_PATCH_INNER * outer,
            };
            if !(inner < 0.5 * outer) {
                return Err(Error::InvalidFamily(match pair {
                    Some(i) => format!(
                        "pair {}: truncation disk of radius {inner:e} is too close to a puncture or zero of q0",
                        i + 1
                    ),
                    None => "zero of q0 too close to another feature".into(),
                }));
            }
            patches.push(Patch { center: c, inner, outer });
        }
        let reach = centers.iter().map(|(c, _)| c.norm()).fold(0.0, f64::max);
        let chart_radius = 4.0f64.max(2.0 * reach);
        let min_plateau = patches.iter().map(|p| 0.5 * p.outer).fold(f64::INFINITY, f64::min);
        Ok(Layout {
            q,
            patches,
            chart_radius,
            min_plateau,
            g: family.genus(),
        })
    }

    fn cutoff_sum(&self, z: Complex64) -> f64 {
        self.patches
            .iter()
            .map(|p| bump((z - p.center).norm() / p.outer))
            .sum()
    }

    /// Adds `weight · integrand(z)` into the packed upper triangles.
    #[inline]
    fn accumulate(&self, z: Complex64, weight: f64, a: &mut [Complex64], acc: &mut [Complex64]) {
        let g = self.g;
        let mut s = Complex64::new(0.0, 0.0);
        for (k, th) in self.q.theta.iter().enumerate() {
            a[k] = th.eval(z);
            s += a[k] * self.q.weights[k];
        }
        // |q₀|/q₀ with q₀ = −s²
        let phase = if s.norm_sqr() > 0.0 { -s.conj() / s } else { Complex64::new(0.0, 0.0) };
        let mut idx = 0;
        for i in 0..g {
            for j in i..g {
                acc[idx] += a[i] * a[j] * phase * weight;
                acc[idx + 1] += a[i] * a[j].conj() * weight;
                idx += 2;
            }
        }
    }

    fn integrate(&self, level: u32, exec: Execution) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let cells = self.cells(level);
        let parts = exec.map(cells, |cell| self.integrate_cell(&cell));
        let g = self.g;
        let mut total = vec![Complex64::new(0.0, 0.0); g * (g + 1)];
        // fixed summation order, whatever the thread count
        for p in parts {
            total.iter_mut().zip(&p).for_each(|(t, x)| *t += x);
        }
        let mut b = DMatrix::zeros(g, g);
        let mut gram = DMatrix::zeros(g, g);
        let mut idx = 0;
        for i in 0..g {
            for j in i..g {
                b[(i, j)] = total[idx];
                b[(j, i)] = total[idx];
                gram[(i, j)] = total[idx + 1];
                gram[(j, i)] = total[idx + 1].conj();
                if i == j {
                    gram[(i, i)].im = 0.0;
                }
                idx += 2;
            }
        }
        (b, gram)
    }

    fn cells(&self, level: u32) -> Vec<Cell> {
        let scale = 1usize << level;
        let mut cells = Vec::new();
        for (k, p) in self.patches.iter().enumerate() {
            let (u0, u1) = (p.inner.ln(), p.outer.ln());
            let panels = (((u1 - u0) / 0.5).ceil() as usize).max(2) * scale;
            let angles = 32 * scale;
            for m in 0..panels {
                cells.push(Cell::Patch {
                    patch: k,
                    u0: u0 + (u1 - u0) * m as f64 / panels as f64,
                    u1: u0 + (u1 - u0) * (m + 1) as f64 / panels as f64,
                    angles,
                });
            }
        }
        let r = self.chart_radius;
        let step = 0.5 * self.min_plateau / scale as f64;
        let panels = (r / step).ceil() as usize;
        let angles = ((4.0 * PI * r / step).ceil() as usize).max(64);
        for m in 0..panels {
            cells.push(Cell::Bulk {
                r0: r * m as f64 / panels as f64,
                r1: r * (m + 1) as f64 / panels as f64,
                angles,
            });
        }
        let panels = 4 * scale;
        for m in 0..panels {
            cells.push(Cell::Outer {
                r0: m as f64 / (panels as f64 * r),
                r1: (m + 1) as f64 / (panels as f64 * r),
                angles: 64 * scale,
            });
        }
        cells
    }

    fn integrate_cell(&self, cell: &Cell) -> Vec<Complex64> {
        let g = self.g;
        let mut acc = vec![Complex64::new(0.0, 0.0); g * (g + 1)];
        let mut a = vec![Complex64::new(0.0, 0.0); g];
        let (nodes, weights) = gauss_legendre();
        match *cell {
            Cell::Patch { patch, u0, u1, angles } => {
                let p = self.patches[patch];
                let dphi = 2.0 * PI / angles as f64;
                for (x, w) in nodes.iter().zip(weights) {
                    let u = 0.5 * (u0 + u1) + 0.5 * (u1 - u0) * x;
                    let rho = u.exp();
                    let chi = bump(rho / p.outer);
                    // dA = ρ² du dφ
                    let radial = 0.5 * (u1 - u0) * w * rho * rho * chi * dphi;
                    for k in 0..angles {
                        let z = p.center + Complex64::from_polar(rho, dphi * k as f64);
                        self.accumulate(z, radial, &mut a, &mut acc);
                    }
                }
            }
            Cell::Bulk { r0, r1, angles } => {
                let dphi = 2.0 * PI / angles as f64;
                for (x, w) in nodes.iter().zip(weights) {
                    let rho = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * x;
                    let radial = 0.5 * (r1 - r0) * w * rho * dphi;
                    for k in 0..angles {
                        let z = Complex64::from_polar(rho, dphi * k as f64);
                        let rest = 1.0 - self.cutoff_sum(z);
                        if rest > 0.0 {
                            self.accumulate(z, radial * rest, &mut a, &mut acc);
                        }
                    }
                }
            }
            Cell::Outer { r0, r1, angles } => {
                let dphi = 2.0 * PI / angles as f64;
                for (x, w) in nodes.iter().zip(weights) {
                    let rho = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * x;
                    // dA_z = dA_w / |w|⁴
                    let radial = 0.5 * (r1 - r0) * w * rho * dphi / rho.powi(4);
                    for k in 0..angles {
                        let wpt = Complex64::from_polar(rho, dphi * k as f64);
                        self.accumulate(wpt.inv(), radial, &mut a, &mut acc);
                    }
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    /// `u = ln ρ` panel of a feature patch.
    Patch { patch: usize, u0: f64, u1: f64, angles: usize },
    /// Radial panel of the disk `|z| < R`.
    Bulk { r0: f64, r1: f64, angles: usize },
    /// Radial panel of the disk `|w| < 1/R`, `w = 1/z`.
    Outer { r0: f64, r1: f64, angles: usize },
}

/// Eight-point Gauss-Legendre rule on `[-1, 1]`.
fn gauss_legendre() -> (&'static [f64; GAUSS_NODES], &'static [f64; GAUSS_NODES]) {
    const X: [f64; GAUSS_NODES] = [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    const W: [f64; GAUSS_NODES] = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_48,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_48,
        0.101_228_536_290_376_26,
    ];
    (&X, &W)
}

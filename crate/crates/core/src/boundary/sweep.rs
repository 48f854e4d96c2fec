//! Degeneration sweeps along a schedule of truncation parameters.

use serde::{Deserialize, Serialize};

use super::family::PinchingFamily;
use super::lambda::{lambda_eigs, lambda_raw};
use super::quadrature::{boundary_matrices, QuadratureOptions};
use crate::error::Result;
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    /// `Re B_ii / log|t|`.
    pub b_ratio: Vec<f64>,
    pub b_ratio_err: Vec<f64>,
    /// `G_ii / (−log|t|)`.
    pub g_ratio: Vec<f64>,
    pub g_ratio_err: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_err: Vec<f64>,
    pub clipped: Vec<bool>,
    pub product: f64,
    pub product_err: f64,
    /// Accepted quadrature level.
    pub level: u32,
}

/// One row per schedule entry, all pairs truncated at the same `|t|`.
pub fn degeneration_sweep(
    family: &PinchingFamily,
    schedule: &[f64],
    options: &QuadratureOptions,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    let g = family.genus();
    let mut rows = Vec::with_capacity(schedule.len());
    for &t in schedule {
        let fam = family.with_truncation(t)?;
        let m = boundary_matrices(&fam, options, exec)?;
        let log_t = t.abs().ln();
        let coarse = lambda_raw(&m.b_coarse, &m.gram_coarse)?;
        let fine = lambda_raw(&m.b_phi, &m.gram)?;
        let lambda_err: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).collect();
        let spread = lambda_err.iter().fold(options.tolerance, |a, &b| a.max(b));
        let spectrum = lambda_eigs(&m.b_phi, &m.gram, spread)?;
        let product = spectrum.product();
        let product_err = (product - coarse.iter().map(|v| v.min(1.0)).product::<f64>()).abs();
        rows.push(SweepRow {
            t,
            b_ratio: (0..g).map(|i| m.b_phi[(i, i)].re / log_t).collect(),
            b_ratio_err: (0..g).map(|i| m.b_error[(i, i)] / log_t.abs()).collect(),
            g_ratio: (0..g).map(|i| m.gram[(i, i)].re / -log_t).collect(),
            g_ratio_err: (0..g).map(|i| m.gram_error[(i, i)] / log_t.abs()).collect(),
            lambda: spectrum.values,
            lambda_err,
            clipped: spectrum.clipped,
            product,
            product_err,
            level: m.level,
        });
    }
    Ok(rows)
}

/// Limit of a ratio behaving like `R + c/log|t|`, extrapolated from the
/// last two points of `(t, ratio, quadrature error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLawLimit {
    pub ratio: f64,
    pub limit: f64,
    /// `|ratio − limit|`, plus the shift of the limit against the preceding
    /// pair of points, plus the quadrature error.
    pub error_bar: f64,
}

pub fn log_law_limit(points: &[(f64, f64, f64)]) -> Option<LogLawLimit> {
    let extrapolate = |a: (f64, f64, f64), b: (f64, f64, f64)| {
        let (ia, ib) = (1.0 / a.0.abs().ln(), 1.0 / b.0.abs().ln());
        let c = (b.1 - a.1) / (ib - ia);
        b.1 - c * ib
    };
    let n = points.len();
    if n < 2 {
        return None;
    }
    let last = points[n - 1];
    let limit = extrapolate(points[n - 2], last);
    let shift = if n >= 3 { (limit - extrapolate(points[n - 3], points[n - 2])).abs() } else { 0.0 };
    Some(LogLawLimit {
        ratio: last.1,
        limit,
        error_bar: (last.1 - limit).abs() + shift + last.2,
    })
}

/// Whether each `Λ_i` is nondecreasing along the sweep up to the summed
/// error bars of neighbouring rows.
pub fn is_monotone_within_errors(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| {
        w[0].lambda
            .iter()
            .zip(&w[1].lambda)
            .zip(w[0].lambda_err.iter().zip(&w[1].lambda_err))
            .all(|((a, b), (ea, eb))| *b >= a - ea - eb)
    })
}

/// CSV with one row per truncation; per-pair columns are indexed from 1.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let g = rows.first().map_or(0, |r| r.lambda.len());
    let mut header = vec!["t".to_string()];
    for name in ["b_ratio", "b_ratio_err", "g_ratio", "g_ratio_err", "lambda", "lambda_err", "clipped"] {
        header.extend((1..=g).map(|i| format!("{name}_{i}")));
    }
    header.extend(["product", "product_err", "level"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let mut f = vec![format!("{:e}", r.t)];
        for col in [&r.b_ratio, &r.b_ratio_err, &r.g_ratio, &r.g_ratio_err, &r.lambda, &r.lambda_err] {
            f.extend(col.iter().map(|v| format!("{v:.10e}")));
        }
        f.extend(r.clipped.iter().map(|c| c.to_string()));
        f.push(format!("{:.10e}", r.product));
        f.push(format!("{:.3e}", r.product_err));
        f.push(r.level.to_string());
        out.push_str(&f.join(","));
        out.push('\n');
    }
    out
}

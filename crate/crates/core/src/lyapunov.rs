//! Lyapunov spectrum of the Zorich cocycle acting on cohomology.
//!
//! Exponents are measured per Zorich block and normalized by the top one, so
//! `λ₁ = 1` by construction and the unknown time change between blocks and
//! Teichmüller time cancels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::iet::{stratum_of, Iet, Permutation};
use crate::linalg::{Frame, IntMatrix};
use crate::rauzy::{Inducer, ZorichBlock};
use crate::rng::{rng_from_seed, uniform_simplex, PRNG_ALGORITHM};

/// The intersection form attached to a permutation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymplecticStructure {
    pub omega: IntMatrix,
    pub rank: usize,
}

/// `Ω_{αβ} = +1` if `α` precedes `β` on top and follows it on the bottom,
/// `-1` in the opposite case, `0` otherwise.
pub fn symplectic_form(perm: &Permutation) -> SymplecticStructure {
    let d = perm.d();
    let tp = perm.top_positions();
    let bp = perm.bottom_positions();
    let mut omega = IntMatrix::zeros(d);
    for a in 0..d {
        for b in 0..d {
            let v = if tp[a] < tp[b] && bp[a] > bp[b] {
                1
            } else if tp[a] > tp[b] && bp[a] < bp[b] {
                -1
            } else {
                0
            };
            omega.set(a, b, v);
        }
    }
    let rank = omega.rank();
    SymplecticStructure { omega, rank }
}

/// `M Ω_π Mᵀ == Ω_π'` for the cohomology action `M` of a block taking `π` to
/// `π'`, checked exactly.
pub fn preserves_form(cohomology: &IntMatrix, before: &IntMatrix, after: &IntMatrix) -> bool {
    cohomology
        .checked_mul(before)
        .and_then(|m| m.checked_mul(&cohomology.transpose()))
        .is_some_and(|m| &m == after)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Zorich blocks.
    pub steps: u64,
    /// Re-orthonormalize every this many blocks.
    pub qr_period: u64,
    /// Batch-means windows for the standard errors.
    pub windows: usize,
    /// Frame entries beyond this force an early re-orthonormalization.
    pub growth_limit: f64,
    /// Reject the estimate when the stderr of `λ₂` exceeds this.
    pub stderr_bound: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            steps: 1_000_000,
            qr_period: 10,
            windows: 100,
            growth_limit: 1e4,
            stderr_bound: None,
        }
    }
}

impl SpectrumConfig {
    pub fn with_steps(steps: u64) -> Self {
        SpectrumConfig {
            steps,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 10_000 {
            return Err(Error::InvalidInput(format!(
                "steps = {} is below the minimum of 10^4",
                self.steps
            )));
        }
        if self.qr_period == 0 {
            return Err(Error::InvalidInput("qr_period must be at least 1".into()));
        }
        if self.windows < 2 || self.windows as u64 > self.steps {
            return Err(Error::InvalidInput(format!("bad window count {}", self.windows)));
        }
        Ok(())
    }
}

/// Floor of the zero-exponent threshold.
/// Largest entry of a block piece fed to the float frame; see
/// [`Inducer::next_piece`].
pub const PIECE_ENTRY_LIMIT: i64 = 1 << 12;

pub const ZERO_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub perm: Permutation,
    pub seed: Option<u64>,
    pub steps: u64,
    pub qr_period: u64,
    pub genus: usize,
    pub sigma: usize,
    /// Raw exponents per Zorich block, descending.
    pub nu: Vec<f64>,
    pub nu_stderr: Vec<f64>,
    /// `ν_i / ν_1` on the symplectic part: the top `g` and bottom `g` raw
    /// exponents.
    pub lambda: Vec<f64>,
    pub lambda_stderr: Vec<f64>,
    /// Number of normalized exponents (out of `d`) below the zero threshold.
    pub zero_count: usize,
    pub rauzy_steps: u64,
}

impl SpectrumEstimate {
    /// `λᵢ + λ_{2g+1-i}` for `i = 1..g`.
    pub fn symmetry_defects(&self) -> Vec<f64> {
        let n = self.lambda.len();
        (0..n / 2).map(|i| self.lambda[i] + self.lambda[n - 1 - i]).collect()
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        self.symmetry_defects().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `λ₂`, if the genus is at least 2; for the torus the second
    /// symplectic exponent is `-1`.
    pub fn lambda2(&self) -> f64 {
        self.lambda[1]
    }

    pub fn lambda2_stderr(&self) -> f64 {
        self.lambda_stderr[1]
    }

    /// All `d` exponents normalized by `ν₁`.
    pub fn normalized_nu(&self) -> Vec<f64> {
        self.nu.iter().map(|v| v / self.nu[0]).collect()
    }
}

/// Lengths drawn from the simplex with the pinned generator.
pub fn seeded_iet(perm: &Permutation, seed: u64) -> Result<Iet> {
    let mut rng = rng_from_seed(seed);
    Iet::new(perm.clone(), &uniform_simplex(&mut rng, perm.d()))
}

pub fn estimate_spectrum(perm: &Permutation, seed: u64, config: &SpectrumConfig) -> Result<SpectrumEstimate> {
    let iet = seeded_iet(perm, seed)?;
    let mut est = estimate_spectrum_from(&iet, config)?;
    est.seed = Some(seed);
    Ok(est)
}

/// Runs the cocycle from a given exchange.
pub fn estimate_spectrum_from(iet: &Iet, config: &SpectrumConfig) -> Result<SpectrumEstimate> {
    config.validate()?;
    let d = iet.d();
    let stratum = stratum_of(iet.perm());
    let g = stratum.genus;

    let mut inducer = Inducer::new(iet);
    let mut block = ZorichBlock::identity(d);
    let mut frame = Frame::standard(d, d);
    let mut scratch = Vec::with_capacity(d);
    let mut logs = vec![0.0; d];
    let mut window_sums = vec![vec![0.0; d]; config.windows];
    let mut window_len = vec![0u64; config.windows];
    let mut since_qr = 0u64;

    let window_of = |b: u64| ((b as u128 * config.windows as u128) / config.steps as u128) as usize;
    while inducer.blocks() < config.steps {
        let b = inducer.blocks();
        inducer.next_piece(&mut block, PIECE_ENTRY_LIMIT)?;
        frame.apply_transpose(&block.matrix, &mut scratch);
        let w = window_of(b);
        let finished = !block.split;
        if finished {
            window_len[w] += 1;
            since_qr += 1;
        }
        let window_ends = finished && (b + 1 == config.steps || window_of(b + 1) != w);
        if block.split
            || since_qr >= config.qr_period
            || window_ends
            || frame.max_abs() > config.growth_limit
        {
            frame.orthonormalize(&mut logs);
            window_sums[w].iter_mut().zip(&logs).for_each(|(s, l)| *s += l);
            since_qr = 0;
        }
    }

    let n = config.steps as f64;
    let totals: Vec<f64> = (0..d)
        .map(|i| window_sums.iter().map(|w| w[i]).sum::<f64>())
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));
    let nu: Vec<f64> = order.iter().map(|&i| totals[i] / n).collect();

    // per-window exponents, in sorted order
    let per_window: Vec<Vec<f64>> = window_sums
        .iter()
        .zip(&window_len)
        .map(|(s, &len)| order.iter().map(|&i| s[i] / len as f64).collect())
        .collect();
    let nu_stderr: Vec<f64> = (0..d)
        .map(|i| batch_stderr(per_window.iter().map(|w| w[i])))
        .collect();

    let nu1 = nu[0];
    let symplectic: Vec<usize> = (0..g).chain(d - g..d).collect();
    let lambda: Vec<f64> = symplectic.iter().map(|&i| nu[i] / nu1).collect();
    let lambda_stderr: Vec<f64> = symplectic
        .iter()
        .zip(&lambda)
        .map(|(&i, &l)| {
            // delta method for the ratio ν_i / ν_1
            batch_stderr(per_window.iter().map(|w| w[i] - l * w[0])) / nu1.abs()
        })
        .collect();
    let zero_count = (0..d)
        .filter(|&i| {
            let threshold = ZERO_THRESHOLD.max(3.0 * nu_stderr[i] / nu1.abs());
            (nu[i] / nu1).abs() < threshold
        })
        .count();

    let est = SpectrumEstimate {
        perm: iet.perm().clone(),
        seed: None,
        steps: config.steps,
        qr_period: config.qr_period,
        genus: g,
        sigma: stratum.sigma,
        nu,
        nu_stderr,
        lambda,
        lambda_stderr,
        zero_count,
        rauzy_steps: inducer.steps(),
    };
    if let Some(bound) = config.stderr_bound {
        let s = est.lambda2_stderr();
        if !(s <= bound) {
            return Err(Error::NonConvergence { stderr: s, bound });
        }
    }
    Ok(est)
}

/// Standard error of the mean of equally weighted batch means.
fn batch_stderr(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Independent runs over seeds; results in seed order.
pub fn estimate_batch(
    perm: &Permutation,
    seeds: &[u64],
    config: &SpectrumConfig,
    exec: Execution,
) -> Vec<Result<SpectrumEstimate>> {
    exec.map(seeds.to_vec(), |seed| estimate_spectrum(perm, seed, config))
}

/// Cross-seed statistics of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub runs: usize,
    pub lambda_mean: Vec<f64>,
    /// `max - min` over seeds, per exponent.
    pub lambda_spread: Vec<f64>,
    pub lambda_sd: Vec<f64>,
    pub sym_defect_max: f64,
}

pub fn summarize(estimates: &[SpectrumEstimate]) -> Option<BatchSummary> {
    let first = estimates.first()?;
    let m = first.lambda.len();
    let runs = estimates.len();
    let column = |i: usize| estimates.iter().map(move |e| e.lambda[i]);
    let lambda_mean: Vec<f64> = (0..m).map(|i| column(i).sum::<f64>() / runs as f64).collect();
    let lambda_spread = (0..m)
        .map(|i| {
            let (lo, hi) = column(i).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
            hi - lo
        })
        .collect();
    let lambda_sd = (0..m)
        .map(|i| {
            if runs < 2 {
                return 0.0;
            }
            let mu = lambda_mean[i];
            (column(i).map(|x| (x - mu).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt()
        })
        .collect();
    let sym_defect_max = estimates
        .iter()
        .map(SpectrumEstimate::max_symmetry_defect)
        .fold(0.0, f64::max);
    Some(BatchSummary {
        runs,
        lambda_mean,
        lambda_spread,
        lambda_sd,
        sym_defect_max,
    })
}

/// Flat record of one estimate, for CSV and JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub perm_id: String,
    pub seed: Option<u64>,
    pub steps: u64,
    pub lambda: Vec<f64>,
    pub lambda_stderr: Vec<f64>,
    pub sym_defects: Vec<f64>,
    pub sym_defect_max: f64,
    pub zero_count: usize,
    pub expected_zero_count: usize,
    pub stderr_2: f64,
    pub prng: String,
    /// Omitted from CSV unless timing is requested.
    pub wall_seconds: Option<f64>,
}

pub fn spectrum_report(est: &SpectrumEstimate) -> SpectrumReport {
    SpectrumReport {
        perm_id: est.perm.id(),
        seed: est.seed,
        steps: est.steps,
        lambda: est.lambda.clone(),
        lambda_stderr: est.lambda_stderr.clone(),
        sym_defects: est.symmetry_defects(),
        sym_defect_max: est.max_symmetry_defect(),
        zero_count: est.zero_count,
        expected_zero_count: est.sigma - 1,
        stderr_2: est.lambda2_stderr(),
        prng: PRNG_ALGORITHM.to_string(),
        wall_seconds: None,
    }
}

impl SpectrumReport {
    /// `perm_id,seed,steps,lambda_1..lambda_2g,sym_defect_max,zero_count,stderr_2,wall_seconds`
    pub fn csv_header(two_g: usize) -> String {
        let mut cols = vec!["perm_id".to_string(), "seed".into(), "steps".into()];
        cols.extend((1..=two_g).map(|i| format!("lambda_{i}")));
        cols.extend(["sym_defect_max", "zero_count", "stderr_2", "wall_seconds"].map(String::from));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.perm_id.clone(),
            self.seed.map_or_else(|| "NA".into(), |s| s.to_string()),
            self.steps.to_string(),
        ];
        cols.extend(self.lambda.iter().map(|l| format!("{l:.17e}")));
        cols.push(format!("{:.17e}", self.sym_defect_max));
        cols.push(self.zero_count.to_string());
        cols.push(format!("{:.17e}", self.stderr_2));
        cols.push(self.wall_seconds.map_or_else(|| "NA".into(), |w| format!("{w:.3}")));
        cols.join(",")
    }
}

use std::path::Path;

use anyhow::Context;
use clap::Args;
use kz_core::lyapunov::{estimate_batch, spectrum_report, summarize, BatchSummary, SpectrumConfig, SpectrumReport};
use kz_core::{stratum_of, Execution, Permutation, StratumSignature};
use serde::{Deserialize, Serialize};

use crate::{fmt_f, parse_count, write_csv, write_json, Command, ExperimentManifest, Outcome};

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LyapArgs {
    /// Top row, 1-based symbols separated by commas.
    #[arg(long)]
    pub top: String,
    #[arg(long)]
    pub bottom: String,
    /// Zorich blocks per seed (`1e7` is accepted).
    #[arg(long, value_parser = parse_count, default_value = "1e6")]
    pub steps: u64,
    /// Number of seeds.
    #[arg(long, value_parser = parse_count, default_value = "10")]
    pub seeds: u64,
    /// Seeds are `seed_base, seed_base + 1, …`.
    #[arg(long, default_value_t = 1)]
    pub seed_base: u64,
    #[arg(long, default_value_t = 10)]
    pub qr_period: u64,
    #[arg(long, default_value_t = 100)]
    pub windows: usize,
    /// Fail with exit code 2 when the stderr of `λ₂` exceeds this.
    #[arg(long)]
    pub stderr_bound: Option<f64>,
}

impl LyapArgs {
    pub fn config(&self) -> SpectrumConfig {
        SpectrumConfig {
            steps: self.steps,
            qr_period: self.qr_period,
            windows: self.windows,
            stderr_bound: self.stderr_bound,
            ..SpectrumConfig::default()
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|k| self.seed_base + k).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapReport {
    pub manifest: ExperimentManifest,
    pub perm_id: String,
    pub stratum: StratumSignature,
    pub runs: Vec<SpectrumReport>,
    pub summary: BatchSummary,
}

pub fn run(args: &LyapArgs, out: &Path, exec: Execution) -> anyhow::Result<Outcome> {
    let start = std::time::Instant::now();
    let perm = Permutation::parse(&args.top, &args.bottom).context("--top/--bottom")?;
    if args.seeds == 0 {
        anyhow::bail!("--seeds must be at least 1");
    }
    let config = args.config();
    let estimates = estimate_batch(&perm, &args.seed_list(), &config, exec)
        .into_iter()
        .collect::<kz_core::Result<Vec<_>>>()?;
    let summary = summarize(&estimates).expect("at least one seed");
    let runs: Vec<SpectrumReport> = estimates.iter().map(spectrum_report).collect();
    let manifest = ExperimentManifest::new(Command::Lyap(args.clone()));

    let two_g = summary.lambda_mean.len();
    let mut body = SpectrumReport::csv_header(two_g);
    body.push('\n');
    for r in &runs {
        body.push_str(&r.csv_row());
        body.push('\n');
    }
    body.push_str(&aggregate_row(&perm, args.steps, &summary));
    body.push('\n');
    let csv = write_csv(out, "lyap.csv", &manifest, &body)?;

    let report = LyapReport {
        manifest: manifest.with_wall_seconds(start.elapsed().as_secs_f64()),
        perm_id: perm.id(),
        stratum: stratum_of(&perm),
        runs,
        summary,
    };
    let json = write_json(out, "lyap.json", &report)?;
    Ok(Outcome {
        files: vec![csv, json],
        warnings: vec![],
    })
}

/// Seed column `mean`; `stderr_2` is the standard error of the mean `λ₂`.
fn aggregate_row(perm: &Permutation, steps: u64, s: &BatchSummary) -> String {
    let mut cols = vec![perm.id(), "mean".into(), steps.to_string()];
    cols.extend(s.lambda_mean.iter().map(|&v| fmt_f(v)));
    cols.push(fmt_f(s.sym_defect_max));
    cols.push("NA".into());
    let se = s.lambda_sd.get(1).map_or(0.0, |sd| sd / (s.runs as f64).sqrt());
    cols.push(fmt_f(se));
    cols.push("NA".into());
    cols.join(",")
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use kz_core::deviation::*;
use kz_core::lyapunov::seeded_iet;
use kz_core::{Execution, Iet, Permutation};
use serde::{Deserialize, Serialize};

use crate::{fmt_f, parse_count, write_csv, write_json, Command, ExperimentManifest, Outcome};

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DeviateArgs {
    #[arg(long, default_value = "1,2,3,4")]
    pub top: String,
    #[arg(long, default_value = "4,3,2,1")]
    pub bottom: String,
    /// Genus-one control: the two-interval exchange with golden-mean lengths.
    #[arg(long)]
    pub torus: bool,
    /// First seed; drawn at random (and printed) when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ensemble size: seeds `seed, seed + 1, …`, one exchange and orbit each
    /// (one exchange, many orbits for `--torus`).
    #[arg(long, value_parser = parse_count, default_value = "1")]
    pub orbits: u64,
    /// `interval:K` (mean-zero indicator of the K-th top interval) or
    /// `indicator:A,B` (mean-zero indicator of [A, B)).
    #[arg(long, default_value = "interval:1")]
    pub observable: String,
    #[arg(long, value_parser = parse_count, default_value = "1e7")]
    pub n_max: u64,
    #[arg(long, value_parser = parse_count, default_value = "1e4")]
    pub n_start: u64,
    #[arg(long, default_value_t = 10)]
    pub per_decade: usize,
    /// Slope fit window; defaults to `[1e5, n_max]`.
    #[arg(long, value_parser = parse_count)]
    pub fit_lo: Option<u64>,
    #[arg(long, value_parser = parse_count)]
    pub fit_hi: Option<u64>,
    /// Blocks on either side of the Oseledec frame base.
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub frame_depth: u64,
    /// Skip the projected-growth table.
    #[arg(long)]
    pub no_growth: bool,
    /// A `lyap.json` report whose mean `λ₂` the slope is compared against.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

pub fn parse_observable(s: &str) -> anyhow::Result<Observable> {
    let bad = || format!("--observable `{s}`: expected interval:K or indicator:A,B");
    let (kind, rest) = s.split_once(':').with_context(bad)?;
    match kind {
        "interval" => {
            let k: usize = rest.trim().parse().ok().filter(|&k| k >= 1).with_context(bad)?;
            Ok(Observable::Interval(k - 1))
        }
        "indicator" => {
            let (a, b) = rest.split_once(',').with_context(bad)?;
            let a: f64 = a.trim().parse().ok().with_context(bad)?;
            let b: f64 = b.trim().parse().ok().with_context(bad)?;
            Ok(Observable::Indicator { a, b })
        }
        _ => bail!(bad()),
    }
}

pub fn golden_torus() -> Iet {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    Iet::new(Permutation::rotation_class(2).expect("d = 2"), &[phi - 1.0, 2.0 - phi]).expect("positive lengths")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub source: String,
    pub lambda2: f64,
    /// `|slope − λ₂|`.
    pub agreement: f64,
    pub nearest_cluster: usize,
    pub lower_cluster: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub label: String,
    pub kind: ClusterKind,
    pub exponent: f64,
    /// Max of the projected norm over each decade `(10^{k-1}, 10^k]`.
    pub decade_maxima: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviateReport {
    pub manifest: ExperimentManifest,
    pub observable: String,
    pub window: FitWindow,
    pub pooled: SlopeFit,
    pub per_seed: Vec<(u64, SlopeFit)>,
    pub comparison: Option<Comparison>,
    pub growth: Vec<GrowthSummary>,
}

pub fn run(args: &DeviateArgs, out: &Path, exec: Execution) -> anyhow::Result<Outcome> {
    let start = std::time::Instant::now();
    let mut args = args.clone();
    let mut warnings = Vec::new();
    let seed = match args.seed {
        Some(s) => s,
        None => {
            let s = rand::random::<u32>() as u64;
            eprintln!("seed: {s}");
            args.seed = Some(s);
            s
        }
    };
    let observable = parse_observable(&args.observable)?;
    if args.orbits == 0 {
        bail!("--orbits must be at least 1");
    }
    if args.n_start == 0 || args.n_max <= args.n_start {
        bail!("need 1 <= --n-start < --n-max");
    }
    if args.per_decade == 0 {
        bail!("--per-decade must be at least 1");
    }
    let schedule = geometric_schedule(args.n_start, args.n_max, args.per_decade);
    let window = FitWindow {
        lo: args.fit_lo.unwrap_or(100_000),
        hi: args.fit_hi.unwrap_or(args.n_max),
    };
    let seeds: Vec<u64> = (0..args.orbits).map(|k| seed + k).collect();
    let (first_iet, ensemble) = if args.torus {
        let iet = golden_torus();
        let e = orbit_ensemble_slope(&iet, &seeds, observable, &schedule, window, exec)?;
        (iet, e)
    } else {
        let perm = Permutation::parse(&args.top, &args.bottom).context("--top/--bottom")?;
        let e = ensemble_slope(&perm, &seeds, observable, &schedule, window, exec)?;
        (seeded_iet(&perm, seed)?, e)
    };

    let comparison = match &args.compare {
        None => None,
        Some(path) => match read_lambda(path) {
            Ok(lambda_upper) => {
                let class = classify_slope(ensemble.pooled, &lambda_upper);
                Some(Comparison {
                    source: path.display().to_string(),
                    lambda2: lambda_upper.get(1).copied().unwrap_or(0.0),
                    agreement: (ensemble.pooled.exponent - lambda_upper.get(1).copied().unwrap_or(0.0)).abs(),
                    nearest_cluster: class.nearest,
                    lower_cluster: class.lower_cluster,
                })
            }
            Err(e) => {
                let w = format!("warning: comparison skipped: {e:#}");
                eprintln!("{w}");
                warnings.push(w);
                None
            }
        },
    };

    let growth = if args.no_growth {
        Vec::new()
    } else {
        let frame = oseledec_frame(&first_iet, args.frame_depth, args.frame_depth)?;
        projected_growth(&frame.base, &frame, seeded_start(seed), &schedule)?
    };

    let manifest = ExperimentManifest::new(Command::Deviate(args.clone()));
    let label = observable.label();
    let mut files = Vec::new();

    let mut body = String::from("series,n,running_max\n");
    for (s, fit_series) in seeds.iter().map(|s| s.to_string()).zip(&ensemble.per_seed_series) {
        for &(n, v) in fit_series {
            body.push_str(&format!("{s},{n},{}\n", fmt_f(v)));
        }
    }
    for &(n, v) in &ensemble.pooled_series {
        body.push_str(&format!("pooled,{n},{}\n", fmt_f(v)));
    }
    files.push(write_csv(out, "deviate_birkhoff.csv", &manifest, &body)?);

    let mut body = String::from("series,observable,exponent,stderr,points,lambda2,agreement\n");
    let (l2, agree) = comparison
        .as_ref()
        .map_or(("NA".to_string(), "NA".to_string()), |c| (fmt_f(c.lambda2), fmt_f(c.agreement)));
    for (s, fit) in seeds.iter().zip(&ensemble.per_seed) {
        body.push_str(&format!("{s},{label},{},{},{},NA,NA\n", fmt_f(fit.exponent), fmt_f(fit.stderr), fit.points));
    }
    let p = ensemble.pooled;
    body.push_str(&format!("pooled,{label},{},{},{},{l2},{agree}\n", fmt_f(p.exponent), fmt_f(p.stderr), p.points));
    files.push(write_csv(out, "deviate_slopes.csv", &manifest, &body)?);

    if !growth.is_empty() {
        let mut body = String::from("label,kind,exponent,n,log_norm,running_max,interval_max\n");
        for c in &growth {
            for g in &c.points {
                body.push_str(&format!(
                    "{},{:?},{},{},{},{},{}\n",
                    c.label,
                    c.kind,
                    fmt_f(c.exponent),
                    g.n,
                    fmt_f(g.log_norm),
                    fmt_f(g.running_max),
                    fmt_f(g.interval_max)
                ));
            }
        }
        files.push(write_csv(out, "deviate_growth.csv", &manifest, &body)?);
    }

    let report = DeviateReport {
        manifest: manifest.with_wall_seconds(start.elapsed().as_secs_f64()),
        observable: label,
        window,
        pooled: ensemble.pooled,
        per_seed: seeds.iter().copied().zip(ensemble.per_seed.iter().copied()).collect(),
        comparison,
        growth: growth.iter().map(|c| summarize_growth(c, args.n_max)).collect(),
    };
    files.push(write_json(out, "deviate.json", &report)?);
    Ok(Outcome { files, warnings })
}

fn summarize_growth(c: &ClusterSeries, n_max: u64) -> GrowthSummary {
    let mut decade_maxima = Vec::new();
    let mut hi = 10u64;
    while hi / 10 < n_max {
        decade_maxima.push((hi.min(n_max), c.max_between(hi / 10, hi)));
        hi = hi.saturating_mul(10);
    }
    GrowthSummary {
        label: c.label.clone(),
        kind: c.kind,
        exponent: c.exponent,
        decade_maxima,
    }
}

/// Upper exponents `[λ_1, …, λ_g]` from a `lyap.json` report.
fn read_lambda(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
    let mean = v
        .pointer("/summary/lambda_mean")
        .and_then(|m| m.as_array())
        .with_context(|| format!("{} has no summary.lambda_mean", path.display()))?;
    let all: Vec<f64> = mean.iter().filter_map(|x| x.as_f64()).collect();
    Ok(all[..all.len() / 2].to_vec())
}

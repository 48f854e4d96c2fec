use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use kz_core::boundary::*;
use kz_core::Execution;
use serde::{Deserialize, Serialize};

use crate::{write_csv, write_json, Command, ExperimentManifest, Outcome};

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BoundaryArgs {
    /// Family JSON: `punctures`, `weights`, `schedule`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<PathBuf>,
    /// Inline copy of the family, recorded in manifests.
    #[arg(skip)]
    #[serde(default)]
    pub spec: Option<FamilySpec>,
    /// Relative tolerance on the refinement difference of every entry.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 5)]
    pub max_level: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub manifest: ExperimentManifest,
    pub rows: Vec<SweepRow>,
    pub monotone: bool,
    /// Limits of `Re B_ii / log|t|` and `G_ii / log|t|`, per pair.
    pub b_log_law: Vec<Option<LogLawLimit>>,
    pub g_log_law: Vec<Option<LogLawLimit>>,
}

pub fn load_spec(args: &BoundaryArgs) -> anyhow::Result<FamilySpec> {
    if let Some(spec) = &args.spec {
        return Ok(spec.clone());
    }
    let path = args.family.as_ref().context("--family is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read family {}", path.display()))?;
    FamilySpec::from_json(&text).with_context(|| format!("family {}", path.display()))
}

pub fn run(args: &BoundaryArgs, out: &Path, exec: Execution) -> anyhow::Result<Outcome> {
    let start = std::time::Instant::now();
    if !(args.tolerance > 0.0 && args.tolerance < 1.0) {
        bail!("--tolerance must lie in (0, 1)");
    }
    let spec = load_spec(args)?;
    if spec.schedule.is_empty() {
        bail!("family has an empty schedule");
    }
    spec.validate_schedule()?;
    let family = spec.family()?;
    let options = QuadratureOptions {
        level: 0,
        max_level: args.max_level,
        tolerance: args.tolerance,
    };
    let rows = degeneration_sweep(&family, &spec.schedule, &options, exec)?;
    let echo = BoundaryArgs {
        family: None,
        spec: Some(spec),
        ..args.clone()
    };
    let manifest = ExperimentManifest::new(Command::Boundary(echo));
    let csv = write_csv(out, "boundary.csv", &manifest, &sweep_csv(&rows))?;
    let law = |g: bool, i: usize| {
        let pts: Vec<(f64, f64, f64)> = rows
            .iter()
            .map(|r| {
                // both ratios against log|t|: B tends to 1/2π, G to −1/2π
                if g {
                    (r.t, -r.g_ratio[i], r.g_ratio_err[i])
                } else {
                    (r.t, r.b_ratio[i], r.b_ratio_err[i])
                }
            })
            .collect();
        log_law_limit(&pts)
    };
    let genus = family.genus();
    let report = BoundaryReport {
        manifest: manifest.with_wall_seconds(start.elapsed().as_secs_f64()),
        monotone: is_monotone_within_errors(&rows),
        b_log_law: (0..genus).map(|i| law(false, i)).collect(),
        g_log_law: (0..genus).map(|i| law(true, i)).collect(),
        rows,
    };
    let json = write_json(out, "boundary.json", &report)?;
    Ok(Outcome {
        files: vec![csv, json],
        warnings: vec![],
    })
}

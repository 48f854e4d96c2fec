//! Batch driver for `kz-core`: spectrum runs, deviation experiments and
//! boundary sweeps, each writing CSV tables and a JSON report into `--out`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use kz_core::Execution;
use serde::{Deserialize, Serialize};

pub mod boundary;
pub mod deviate;
pub mod lyap;
pub mod manifest;

pub use manifest::ExperimentManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_DYNAMICS: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kz", version, about = "Kontsevich-Zorich cocycle experiments")]
pub struct Cli {
    /// Directory for all output files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Run batches on one thread (output is identical either way).
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Lyapunov spectrum over a batch of seeds.
    Lyap(lyap::LyapArgs),
    /// Birkhoff-sum deviation slopes and projected growth.
    Deviate(deviate::DeviateArgs),
    /// Degeneration sweep of the boundary eigenvalues.
    Boundary(boundary::BoundaryArgs),
    /// Re-run the experiment recorded in a manifest (CSV or JSON output).
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lyap(_) => "lyap",
            Command::Deviate(_) => "deviate",
            Command::Boundary(_) => "boundary",
            Command::Rerun(_) => "rerun",
        }
    }
}

/// Files written by a command.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
    run_command(&cli.command, &cli.out, exec)
}

pub fn run_command(command: &Command, out: &Path, exec: Execution) -> anyhow::Result<Outcome> {
    match command {
        Command::Lyap(a) => lyap::run(a, out, exec),
        Command::Deviate(a) => deviate::run(a, out, exec),
        Command::Boundary(a) => boundary::run(a, out, exec),
        Command::Rerun(a) => {
            let text = std::fs::read_to_string(&a.manifest)
                .with_context(|| format!("cannot read manifest {}", a.manifest.display()))?;
            let m = ExperimentManifest::parse(&text)
                .with_context(|| format!("no manifest in {}", a.manifest.display()))?;
            if matches!(m.input, Command::Rerun(_)) {
                bail!("manifest records a rerun");
            }
            run_command(&m.input, out, exec)
        }
    }
}

/// Exit status for an error: numeric non-convergence, aborted dynamics, or
/// a usage/config problem.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use kz_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::NonConvergence { .. })
        | Some(E::QuadratureBudgetExceeded { .. })
        | Some(E::IllConditioned { .. })
        | Some(E::EigenvalueOvershoot { .. })
        | Some(E::SingularGram { .. }) => EXIT_NONCONVERGENCE,
        Some(E::Tie { .. }) | Some(E::HitDiscontinuity { .. }) | Some(E::DegenerateLength { .. }) => EXIT_DYNAMICS,
        _ => EXIT_CONFIG,
    }
}

/// Counts like `10000`, `1e7` or `2.5e6`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v < 1.8e19) {
        return Err(format!("`{s}` is not a nonnegative integer"));
    }
    Ok(v as u64)
}

/// Writes `# manifest` plus `body` to `out/name`.
pub(crate) fn write_csv(out: &Path, name: &str, manifest: &ExperimentManifest, body: &str) -> anyhow::Result<PathBuf> {
    let path = out.join(name);
    let text = format!("{}\n{body}", manifest.csv_line());
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub(crate) fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> anyhow::Result<PathBuf> {
    let path = out.join(name);
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e7"), Ok(10_000_000));
        assert_eq!(parse_count("2.5e3"), Ok(2500));
        assert_eq!(parse_count("42"), Ok(42));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("x").is_err());
    }

    #[test]
    fn exit_codes() {
        let e = |x: kz_core::Error| exit_code(&anyhow::Error::new(x));
        assert_eq!(e(kz_core::Error::Tie { step: 3 }), EXIT_DYNAMICS);
        assert_eq!(e(kz_core::Error::NonConvergence { stderr: 1.0, bound: 0.1 }), EXIT_NONCONVERGENCE);
        assert_eq!(e(kz_core::Error::InvalidInput("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&anyhow::anyhow!("plain")), EXIT_CONFIG);
    }
}

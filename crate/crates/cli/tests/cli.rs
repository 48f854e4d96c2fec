use std::path::Path;
use std::process::Command as Process;

use kz_cli::boundary::BoundaryArgs;
use kz_cli::deviate::DeviateArgs;
use kz_cli::lyap::LyapArgs;
use kz_cli::{run_command, Command, ExperimentManifest, RerunArgs};
use kz_core::Execution;

fn lyap_args() -> LyapArgs {
    LyapArgs {
        top: "1,2,3,4".into(),
        bottom: "4,3,2,1".into(),
        steps: 20_000,
        seeds: 3,
        seed_base: 1,
        qr_period: 10,
        windows: 100,
        stderr_bound: None,
    }
}

fn deviate_args() -> DeviateArgs {
    DeviateArgs {
        top: "1,2,3,4".into(),
        bottom: "4,3,2,1".into(),
        torus: false,
        seed: Some(5),
        orbits: 2,
        observable: "interval:1".into(),
        n_max: 100_000,
        n_start: 10,
        per_decade: 10,
        fit_lo: Some(100),
        fit_hi: None,
        frame_depth: 1000,
        no_growth: false,
        compare: None,
    }
}

fn demo_family() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("families/g2_demo.json")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn lyap_writes_rows_aggregate_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_command(&Command::Lyap(lyap_args()), dir.path(), Execution::default()).unwrap();
    assert_eq!(out.files.len(), 2);
    let csv = read(dir.path(), "lyap.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# manifest: "));
    assert!(lines[1].starts_with("perm_id,seed,steps,lambda_1"));
    assert_eq!(lines.len(), 2 + 3 + 1);
    assert!(lines[5].starts_with("1-2-3-4/4-3-2-1,mean,"));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "lyap.json")).unwrap();
    assert!(json["manifest"]["wall_seconds"].as_f64().is_some());
    assert_eq!(json["stratum"]["genus"], 2);
}

#[test]
fn identical_runs_and_reruns_give_identical_csv() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_command(&Command::Lyap(lyap_args()), a.path(), Execution::Parallel).unwrap();
    run_command(&Command::Lyap(lyap_args()), b.path(), Execution::Sequential).unwrap();
    assert_eq!(read(a.path(), "lyap.csv"), read(b.path(), "lyap.csv"));
    let rerun = Command::Rerun(RerunArgs {
        manifest: a.path().join("lyap.json"),
    });
    run_command(&rerun, c.path(), Execution::default()).unwrap();
    assert_eq!(read(a.path(), "lyap.csv"), read(c.path(), "lyap.csv"));
}

#[test]
fn manifest_hash_tracks_inputs() {
    let a = ExperimentManifest::new(Command::Lyap(lyap_args()));
    let mut other = lyap_args();
    other.seed_base = 2;
    let b = ExperimentManifest::new(Command::Lyap(other));
    assert_eq!(a.input_hash.len(), 64);
    assert_ne!(a.input_hash, b.input_hash);
    assert_eq!(a, ExperimentManifest::new(Command::Lyap(lyap_args())));
    assert_eq!(ExperimentManifest::parse(&a.csv_line()).unwrap(), a);
}

#[test]
fn deviate_tables_and_missing_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = deviate_args();
    args.compare = Some(dir.path().join("absent.json"));
    let out = run_command(&Command::Deviate(args), dir.path(), Execution::default()).unwrap();
    assert_eq!(out.warnings.len(), 1);
    for name in ["deviate_birkhoff.csv", "deviate_slopes.csv", "deviate_growth.csv", "deviate.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let slopes = read(dir.path(), "deviate_slopes.csv");
    assert!(slopes.lines().last().unwrap().starts_with("pooled,interval_1,"));
    assert!(slopes.lines().last().unwrap().ends_with(",NA,NA"));
    let growth = read(dir.path(), "deviate_growth.csv");
    assert!(growth.contains("contracting"));
}

#[test]
fn deviate_compares_against_a_lyap_report() {
    let dir = tempfile::tempdir().unwrap();
    run_command(&Command::Lyap(lyap_args()), dir.path(), Execution::default()).unwrap();
    let mut args = deviate_args();
    args.compare = Some(dir.path().join("lyap.json"));
    args.no_growth = true;
    run_command(&Command::Deviate(args), dir.path(), Execution::default()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "deviate.json")).unwrap();
    let c = &json["comparison"];
    let slope = json["pooled"]["exponent"].as_f64().unwrap();
    let l2 = c["lambda2"].as_f64().unwrap();
    assert!((c["agreement"].as_f64().unwrap() - (slope - l2).abs()).abs() < 1e-15);
}

#[test]
fn unseeded_deviate_records_the_drawn_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = deviate_args();
    args.seed = None;
    args.no_growth = true;
    run_command(&Command::Deviate(args), dir.path(), Execution::default()).unwrap();
    let m = ExperimentManifest::parse(&read(dir.path(), "deviate_slopes.csv")).unwrap();
    match m.input {
        Command::Deviate(a) => assert!(a.seed.is_some()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn boundary_rejects_overlapping_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("bad.json");
    std::fs::write(
        &fam,
        r#"{"punctures": [[[0, 0], [1, 0]], [[1.05, 0], [3, 0]]], "weights": [1, 1], "schedule": [1e-2]}"#,
    )
    .unwrap();
    let args = BoundaryArgs {
        family: Some(fam),
        spec: None,
        tolerance: 1e-3,
        max_level: 4,
    };
    let err = run_command(&Command::Boundary(args), dir.path(), Execution::default()).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("pairs 1 and 2"), "{msg}");
}

#[test]
fn boundary_error_bars_follow_the_tolerance() {
    let spec = kz_core::boundary::FamilySpec {
        schedule: vec![1e-2, 1e-3],
        ..kz_core::boundary::FamilySpec::from_json(&std::fs::read_to_string(demo_family()).unwrap()).unwrap()
    };
    let worst = |tol: f64| {
        let dir = tempfile::tempdir().unwrap();
        let args = BoundaryArgs {
            family: None,
            spec: Some(spec.clone()),
            tolerance: tol,
            max_level: 5,
        };
        run_command(&Command::Boundary(args), dir.path(), Execution::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "boundary.json")).unwrap();
        json["rows"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|r| r["g_ratio_err"].as_array().unwrap().clone())
            .map(|v| v.as_f64().unwrap())
            .fold(0.0, f64::max)
    };
    let (loose, tight) = (worst(1e-2), worst(1e-3));
    assert!(tight <= loose);
    assert!(tight < 1e-3);
}

#[test]
fn binary_exit_codes() {
    let kz = env!("CARGO_BIN_EXE_kz");
    let dir = tempfile::tempdir().unwrap();
    let status = Process::new(kz)
        .args(["--out", dir.path().to_str().unwrap(), "lyap", "--top", "1,2,3,4", "--bottom", "4,3,2,1", "--steps", "0"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(kz_cli::EXIT_CONFIG));
    let status = Process::new(kz)
        .env("KZ_THREADS", "zero")
        .args(["--out", dir.path().to_str().unwrap(), "lyap", "--top", "1,2,3,4", "--bottom", "4,3,2,1"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(kz_cli::EXIT_CONFIG));
    let status = Process::new(kz)
        .env("KZ_THREADS", "1")
        .args(["--out", dir.path().to_str().unwrap(), "lyap", "--top", "1,2,3,4", "--bottom", "4,3,2,1", "--steps", "1e4", "--seeds", "2"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(kz_cli::EXIT_OK));
    let status = Process::new(kz)
        .args(["--out", dir.path().to_str().unwrap(), "lyap", "--top", "1,2,3,4", "--bottom", "4,3,2,1", "--steps", "1e4", "--stderr-bound", "1e-9"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(kz_cli::EXIT_NONCONVERGENCE));
}

//! End-to-end acceptance run: one PASS/FAIL line per criterion, non-zero
//! exit if any fails. Takes several minutes on one core.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use kz_cli::boundary::{BoundaryArgs, BoundaryReport};
use kz_cli::deviate::{golden_torus, DeviateArgs};
use kz_cli::lyap::LyapArgs;
use kz_cli::{run_command, Command, RerunArgs};
use kz_core::boundary::{lambda_raw, FamilySpec};
use kz_core::deviation::*;
use kz_core::lyapunov::*;
use kz_core::rauzy::*;
use kz_core::{stratum_of, Execution, Permutation};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn verdict(id: usize, pass: bool, detail: String) -> Verdict {
    let v = Verdict { id, pass, detail };
    report(&v);
    v
}

fn report(v: &Verdict) {
    println!("criterion {:>2}: {}  {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
}

fn perm(top: &str, bottom: &str) -> Permutation {
    Permutation::parse(top, bottom).unwrap()
}

fn exec() -> Execution {
    Execution::default()
}

fn family_spec() -> FamilySpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("families/g2_demo.json");
    FamilySpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Criteria 1-3 on the g=2 batch; returns the mean λ₂ for criterion 5.
fn genus_two_spectrum(out: &mut Vec<Verdict>) -> f64 {
    let p = perm("1,2,3,4", "4,3,2,1");
    let seeds: Vec<u64> = (1..=10).collect();
    let clock = Instant::now();
    let runs: Vec<SpectrumEstimate> = estimate_batch(&p, &seeds, &SpectrumConfig::with_steps(10_000_000), exec())
        .into_iter()
        .collect::<kz_core::Result<_>>()
        .unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let summary = summarize(&runs).unwrap();

    let defect = summary.sym_defect_max;
    out.push(verdict(
        1,
        defect <= 0.02,
        format!("max |λi + λ(2g+1-i)| = {defect:.5} over 10 seeds x 1e7 blocks ({secs:.0} s, {:.0} s/seed)", secs / 10.0),
    ));

    let (l2, spread) = (summary.lambda_mean[1], summary.lambda_spread[1]);
    out.push(verdict(2, l2 <= 0.95 && spread <= 0.02, format!("λ2 = {l2:.5}, 10-seed spread {spread:.5}")));

    let g3 = perm("1,2,3,4,5,6", "6,5,4,3,2,1");
    let s3 = stratum_of(&g3);
    let e3 = estimate_spectrum(&g3, 1, &SpectrumConfig::with_steps(10_000_000)).unwrap();
    let (a, b) = (e3.lambda[1], e3.lambda[2]);
    out.push(verdict(
        3,
        l2 >= 0.05 && s3.genus == 3 && a >= 0.05 && b >= 0.05,
        format!("g=2: λ2 = {l2:.5}; g=3 (stratum genus {}): λ2 = {a:.5}, λ3 = {b:.5}", s3.genus),
    ));
    l2
}

fn zero_multiplicity(out: &mut Vec<Verdict>) {
    let p = perm("1,2,3,4,5", "5,4,3,2,1");
    let sigma = stratum_of(&p).sigma;
    let e = estimate_spectrum(&p, 1, &SpectrumConfig::with_steps(10_000_000)).unwrap();
    let small = e.normalized_nu().iter().filter(|v| v.abs() < 0.02).count();
    out.push(verdict(
        4,
        small == sigma - 1,
        format!("{small} exponents below 0.02, σ - 1 = {}; normalized ν = {:.4?}", sigma - 1, e.normalized_nu()),
    ));
}

fn cross_estimator(out: &mut Vec<Verdict>, lambda2: f64) {
    let clock = Instant::now();
    let schedule = geometric_schedule(10_000, 100_000_000, 10);
    let window = FitWindow {
        lo: 100_000,
        hi: 100_000_000,
    };
    let obs = Observable::Interval(0);
    let seeds: Vec<u64> = (1..=40).collect();
    let g2 = ensemble_slope(&perm("1,2,3,4", "4,3,2,1"), &seeds, obs, &schedule, window, exec()).unwrap();
    let torus = orbit_ensemble_slope(&golden_torus(), &seeds[..8], obs, &schedule, window, exec()).unwrap();
    let (s, t) = (g2.pooled.exponent, torus.pooled.exponent);
    out.push(verdict(
        5,
        (s - lambda2).abs() <= 0.05 && t < 0.05,
        format!(
            "pooled slope {s:.4} (stderr {:.4}) vs λ2 {lambda2:.4}, |diff| {:.4}; torus slope {t:.2e} ({:.0} s)",
            g2.pooled.stderr,
            (s - lambda2).abs(),
            clock.elapsed().as_secs_f64()
        ),
    ));
}

fn contracting_projection(out: &mut Vec<Verdict>) {
    let iet = seeded_iet(&perm("1,2,3,4", "4,3,2,1"), 1).unwrap();
    let frame = oseledec_frame(&iet, 1000, 1000).unwrap();
    let schedule = geometric_schedule(10_000, 100_000_000, 10);
    let series = projected_growth(&frame.base, &frame, seeded_start(1), &schedule).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for c in series.iter().filter(|c| c.kind == ClusterKind::Contracting) {
        let prev = c.max_between(1_000_000, 10_000_000);
        let last = c.max_between(10_000_000, 100_000_000);
        let overall = c.points.last().map_or(f64::NAN, |p| p.running_max);
        pass &= overall.is_finite() && last <= 1.2 * prev;
        detail.push(format!("{}: max {overall:.4}, decades {prev:.4} -> {last:.4}", c.label));
    }
    pass &= !detail.is_empty();
    out.push(verdict(6, pass, detail.join("; ")));
}

fn boundary(out: &mut Vec<Verdict>, dir: &Path) {
    let clock = Instant::now();
    let args = BoundaryArgs {
        family: None,
        spec: Some(family_spec()),
        tolerance: 1e-6,
        max_level: 5,
    };
    run_command(&Command::Boundary(args), dir, exec()).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(dir.join("boundary.json")).unwrap();
    let r: BoundaryReport = serde_json::from_str(&text).unwrap();
    let last = r.rows.last().unwrap();
    assert_eq!(last.t, 1e-6);

    let target = 1.0 / (2.0 * PI);
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, (b, g)) in r.b_log_law.iter().zip(&r.g_log_law).enumerate() {
        let (b, g) = (b.as_ref().unwrap(), g.as_ref().unwrap());
        let db = (b.ratio - target).abs();
        let dg = (g.ratio + target).abs();
        pass &= db <= 0.05 * target && db <= b.error_bar;
        pass &= dg <= 0.05 * target && dg <= g.error_bar;
        detail.push(format!(
            "pair {}: B {:.7} (dev {db:.2e}, bar {:.2e}, limit {:.7}), G {:.7} (dev {dg:.2e}, bar {:.2e})",
            i + 1,
            b.ratio,
            b.error_bar,
            b.limit,
            g.ratio,
            g.error_bar
        ));
    }
    detail.push(format!("1/2π = {target:.7}; sweep {secs:.0} s"));
    out.push(verdict(7, pass, detail.join("; ")));

    out.push(verdict(
        8,
        last.product >= 0.95 && r.monotone,
        format!(
            "Λ1Λ2 = {:.5} ± {:.1e} at |t| = 1e-6, Λ = {:.5?}, monotone within errors: {}",
            last.product, last.product_err, last.lambda, r.monotone
        ),
    ));
}

fn complex_matrix(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn determinant_identity(out: &mut Vec<Verdict>) {
    let mut rng = kz_core::rng::rng_from_seed(9);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = 1 + k % 4;
        let a = complex_matrix(&mut rng, n);
        let s = complex_matrix(&mut rng, n);
        let g = &a * a.adjoint() + DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.5, 0.0);
        let b = &s + s.transpose();
        let lam = lambda_raw(&b, &g).unwrap();
        let lhs = b.determinant().norm();
        let rhs = g.determinant().re * lam.iter().product::<f64>().sqrt();
        worst = worst.max((lhs - rhs).abs() / lhs.max(rhs));
    }
    out.push(verdict(9, worst <= 1e-8, format!("max relative error {worst:.2e} over 100 pairs, n = 1..4")));
}

fn exactness(out: &mut Vec<Verdict>) {
    let mut agreed = 0;
    let mut full = 0;
    let mut ties = 0;
    let perms = [perm("1,2,3,4", "4,3,2,1"), perm("1,2,3,4,5", "5,4,3,2,1"), perm("1,2,3,4,5,6", "6,5,4,3,2,1")];
    for seed in 0..100u64 {
        let p = &perms[seed as usize % perms.len()];
        let mut rng = kz_core::rng::rng_from_seed(seed);
        let den = 1i64 << 52;
        let nums: Vec<i64> = (0..p.d()).map(|_| rng.random_range(1..den)).collect();
        let exact = RationalIet::from_ratios(p.clone(), &nums, den).unwrap();
        let (e, e_err) = exact_induction_prefix(&exact, 1000);
        let (f, f_err) = inducer_prefix(exact.float_inducer().unwrap(), 1000);
        if e == f && e_err == f_err {
            agreed += 1;
        }
        full += usize::from(e.len() == 1000);
        ties += usize::from(matches!(e_err, Some(kz_core::Error::Tie { .. })));
    }

    let mut blocks = 0u64;
    let mut preserved = 0u64;
    for seed in 0..10 {
        let p = &perms[seed as usize % perms.len()];
        let mut ind = Inducer::new(&seeded_iet(p, seed).unwrap());
        let mut block = ZorichBlock::identity(p.d());
        let mut before = symplectic_form(ind.perm()).omega;
        for _ in 0..10_000 {
            ind.next_block(&mut block).unwrap();
            let after = symplectic_form(ind.perm()).omega;
            blocks += 1;
            preserved += u64::from(preserves_form(&cocycle_on_cohomology(&block), &before, &after));
            before = after;
        }
    }
    out.push(verdict(
        10,
        agreed == 100 && preserved == blocks,
        format!(
            "{agreed}/100 rational seeds agree ({full} ran 1000 steps, {ties} ended in an exact tie at the same step); \
             form preserved on {preserved}/{blocks} blocks"
        ),
    ));
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism(out: &mut Vec<Verdict>, boundary_dir: &Path) {
    let lyap = tempfile::tempdir().unwrap();
    let args = LyapArgs {
        top: "1,2,3,4,5".into(),
        bottom: "5,4,3,2,1".into(),
        steps: 100_000,
        seeds: 4,
        seed_base: 1,
        qr_period: 10,
        windows: 100,
        stderr_bound: None,
    };
    run_command(&Command::Lyap(args), lyap.path(), exec()).unwrap();
    let deviate = tempfile::tempdir().unwrap();
    let args = DeviateArgs {
        top: "1,2,3,4".into(),
        bottom: "4,3,2,1".into(),
        torus: false,
        seed: Some(7),
        orbits: 3,
        observable: "interval:1".into(),
        n_max: 1_000_000,
        n_start: 100,
        per_decade: 10,
        fit_lo: Some(1000),
        fit_hi: None,
        frame_depth: 1000,
        no_growth: false,
        compare: None,
    };
    run_command(&Command::Deviate(args), deviate.path(), exec()).unwrap();

    let mut pass = true;
    let mut detail = Vec::new();
    for (dir, manifest) in [
        (lyap.path(), "lyap.csv"),
        (deviate.path(), "deviate_slopes.csv"),
        (boundary_dir, "boundary.csv"),
    ] {
        let again = tempfile::tempdir().unwrap();
        let rerun = Command::Rerun(RerunArgs {
            manifest: dir.join(manifest),
        });
        run_command(&rerun, again.path(), Execution::Sequential).unwrap();
        let (a, b) = (csv_files(dir), csv_files(again.path()));
        let same = !a.is_empty() && a == b;
        pass &= same;
        detail.push(format!("{manifest}: {} CSV files {}", a.len(), if same { "identical" } else { "differ" }));
    }
    out.push(verdict(11, pass, detail.join("; ")));
}

fn main() {
    let clock = Instant::now();
    let mut out = Vec::new();
    let lambda2 = genus_two_spectrum(&mut out);
    zero_multiplicity(&mut out);
    cross_estimator(&mut out, lambda2);
    contracting_projection(&mut out);
    let boundary_dir = tempfile::tempdir().unwrap();
    boundary(&mut out, boundary_dir.path());
    determinant_identity(&mut out);
    exactness(&mut out);
    determinism(&mut out, boundary_dir.path());

    println!("\nsummary ({:.0} s):", clock.elapsed().as_secs_f64());
    out.sort_by_key(|v| v.id);
    for v in &out {
        report(v);
    }
    let failed = out.iter().filter(|v| !v.pass).count();
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all {} criteria passed", out.len());
}

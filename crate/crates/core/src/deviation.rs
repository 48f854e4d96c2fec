//! Deviation of ergodic averages along exchange orbits.
//!
//! Two views of the same growth: Birkhoff sums of mean-zero step functions,
//! and the visit vector of an orbit segment split along an Oseledec
//! decomposition of the cocycle. In both, the running maximum grows like
//! `N^{λ_i}` for the cluster the observable pairs with.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::iet::{compensated_affine, stratum_of, two_sum, Iet, Orbit, Permutation, RESYNC_PERIOD};
use crate::linalg::{Frame, IntMatrix};
use crate::lyapunov::{seeded_iet, PIECE_ENTRY_LIMIT};
use crate::rauzy::{Inducer, ZorichBlock};
use crate::rng::{rng_from_seed, unit_point};

/// Piecewise-constant function on `[0, 1)`: `values[k]` on
/// `[breakpoints[k-1], breakpoints[k])` with implicit `0` and `1` ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} values for {} breakpoints",
                values.len(),
                breakpoints.len()
            )));
        }
        let inside = breakpoints.iter().all(|&b| b > 0.0 && b < 1.0);
        let increasing = breakpoints.windows(2).all(|w| w[0] < w[1]);
        if !inside || !increasing {
            return Err(Error::InvalidInput(
                "breakpoints must increase strictly inside (0, 1)".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite".into()));
        }
        Ok(StepFunction { breakpoints, values })
    }

    /// Indicator of `[a, b)` with `0 <= a < b <= 1`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(Error::InvalidInput(format!("bad interval [{a}, {b})")));
        }
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        if a > 0.0 {
            breaks.push(a);
            values.push(0.0);
        }
        values.push(1.0);
        if b < 1.0 {
            breaks.push(b);
            values.push(0.0);
        }
        Self::new(breaks, values)
    }

    /// Constant `values[α]` on the top interval of symbol `α`.
    pub fn on_intervals(iet: &Iet, values_by_symbol: &[f64]) -> Result<Self> {
        let bp = iet.top_breakpoints();
        let d = iet.d();
        let breaks = bp[1..d].to_vec();
        let values = iet.perm().top().iter().map(|&s| values_by_symbol[s]).collect();
        Self::new(breaks, values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn widths(&self) -> Vec<f64> {
        let mut edges = Vec::with_capacity(self.breakpoints.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(&self.breakpoints);
        edges.push(1.0);
        edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean(&self) -> f64 {
        let (mut hi, mut lo) = (0.0, 0.0);
        for (v, w) in self.values.iter().zip(self.widths()) {
            let p = v * w;
            let (s, e) = two_sum(hi, p);
            hi = s;
            lo += e + v.mul_add(w, -p);
        }
        hi + lo
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.values[k]
    }

    fn mean_tolerance(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean().abs() <= self.mean_tolerance()
    }
}

/// Subtracts the mean. Inputs that are already mean-zero (to rounding) are
/// returned unchanged, which makes the operation idempotent.
pub fn mean_zero(f: &StepFunction) -> StepFunction {
    if f.is_mean_zero() {
        return f.clone();
    }
    let m = f.mean();
    let mut out = f.clone();
    out.values.iter_mut().for_each(|v| *v -= m);
    // constants go to exactly zero
    if out.values.iter().all(|v| v.abs() <= f.mean_tolerance()) {
        out.values.iter_mut().for_each(|v| *v = 0.0);
    }
    out
}

/// `count` points per decade from `start` to `end`, rounded and deduplicated.
pub fn geometric_schedule(start: u64, end: u64, per_decade: usize) -> Vec<u64> {
    assert!(start >= 1 && end >= start && per_decade >= 1);
    let (a, b) = ((start as f64).log10(), (end as f64).log10());
    let steps = ((b - a) * per_decade as f64).round() as usize;
    let mut out: Vec<u64> = (0..=steps)
        .map(|k| {
            let t = if steps == 0 { a } else { a + (b - a) * k as f64 / steps as f64 };
            10f64.powf(t).round() as u64
        })
        .collect();
    out.dedup();
    if let Some(last) = out.last_mut() {
        *last = end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffPoint {
    pub n: u64,
    /// `S_n = Σ_{k<n} f(T^k x0)`.
    pub sum: f64,
    /// `max_{1<=k<=n} |S_k|`.
    pub running_max: f64,
}

/// Birkhoff sums of a mean-zero step function at the schedule points.
pub fn birkhoff_series(iet: &Iet, f: &StepFunction, x0: f64, schedule: &[u64]) -> Result<Vec<BirkhoffPoint>> {
    if !f.is_mean_zero() {
        return Err(Error::InvalidInput(format!(
            "observable has mean {:e}; apply mean_zero first",
            f.mean()
        )));
    }
    check_schedule(schedule)?;
    let mut orbit = Orbit::new(iet, x0)?;
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    let mut running_max = 0.0f64;
    let mut out = Vec::with_capacity(schedule.len());
    let mut next = schedule.iter().copied().peekable();
    while next.peek() == Some(&0) {
        out.push(BirkhoffPoint { n: 0, sum: 0.0, running_max: 0.0 });
        next.next();
    }
    let Some(&last) = schedule.last() else {
        return Ok(out);
    };
    for n in 1..=last {
        let v = f.eval(orbit.point());
        orbit.step()?;
        let (s, e) = two_sum(hi, v);
        hi = s;
        lo += e;
        if n % RESYNC_PERIOD == 0 {
            let (s, e) = two_sum(hi, lo);
            hi = s;
            lo = e;
        }
        let abs = (hi + lo).abs();
        if abs > running_max {
            running_max = abs;
        }
        if next.peek() == Some(&n) {
            out.push(BirkhoffPoint { n, sum: hi + lo, running_max });
            next.next();
        }
    }
    Ok(out)
}

fn check_schedule(schedule: &[u64]) -> Result<()> {
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("schedule must be strictly increasing".into()));
    }
    Ok(())
}

/// Window of a log-log fit, in iterate counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: u64,
    pub hi: u64,
}

impl FitWindow {
    /// Drops the first decade of the schedule.
    pub fn default_for(schedule: &[u64]) -> Option<FitWindow> {
        let first = *schedule.iter().find(|&&n| n > 0)?;
        Some(FitWindow {
            lo: first.saturating_mul(10),
            hi: *schedule.last()?,
        })
    }
}

/// Minimum span of a slope fit, in decades.
pub const MIN_FIT_DECADES: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares slope of `ln value` against `ln n` over the window.
pub fn deviation_slope(series: &[(u64, f64)], window: FitWindow) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, v)| *n >= window.lo && *n <= window.hi && *v > 0.0)
        .map(|&(n, v)| ((n as f64).ln(), v.ln()))
        .collect();
    let decades = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (b.0 - a.0) / std::f64::consts::LN_10,
        _ => 0.0,
    };
    // a hair of slack for schedules whose endpoints round
    if decades < MIN_FIT_DECADES - 1e-9 || pts.len() < 3 {
        return Err(Error::WindowTooShort {
            decades,
            required: MIN_FIT_DECADES,
        });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        exponent: slope,
        stderr,
        intercept,
        points: pts.len(),
    })
}

/// `(n, running_max)` pairs of a Birkhoff series.
pub fn running_max_series(points: &[BirkhoffPoint]) -> Vec<(u64, f64)> {
    points.iter().map(|p| (p.n, p.running_max)).collect()
}

/// Pointwise geometric mean of several series sampled on the same schedule.
pub fn geometric_mean_series(series: &[Vec<(u64, f64)>]) -> Vec<(u64, f64)> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(k, &(n, _))| {
            let logs: Vec<f64> = series.iter().map(|s| s[k].1).filter(|v| *v > 0.0).map(f64::ln).collect();
            let v = if logs.len() == series.len() {
                (logs.iter().sum::<f64>() / logs.len() as f64).exp()
            } else {
                0.0
            };
            (n, v)
        })
        .collect()
}

/// Index of the nonnegative exponent nearest to `slope` among
/// `lambda_1..lambda_g` and the neutral exponent `0` (index `g`).
pub fn nearest_cluster(slope: f64, lambda_upper: &[f64]) -> usize {
    let mut best = (lambda_upper.len(), slope.abs());
    for (i, &l) in lambda_upper.iter().enumerate() {
        let dist = (slope - l).abs();
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best.0
}

/// Which exponents a cluster covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterKind {
    Expanding,
    Neutral,
    Contracting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub kind: ClusterKind,
    /// First and last exponent index (0-based, descending order).
    pub first: usize,
    pub last: usize,
    /// Normalized exponent(s) of the cluster measured on the way in.
    pub exponent: f64,
    pub label: String,
}

impl Cluster {
    pub fn dim(&self) -> usize {
        self.last - self.first + 1
    }
}

/// Oseledec splitting of the cohomology cocycle at a base exchange.
///
/// The unstable flag comes from pushing a frame forward for
/// `backward_depth` blocks from the input exchange; the base is the exchange
/// reached there. The stable flag comes from `forward_depth` further blocks,
/// applied to a frame in reverse order. Each cluster basis is the
/// intersection of the matching unstable and stable flag members.
#[derive(Debug, Clone)]
pub struct OseledecFrame {
    pub base: Iet,
    pub forward_depth: u64,
    pub backward_depth: u64,
    pub clusters: Vec<Cluster>,
    /// Orthonormal basis per cluster, in cluster order.
    pub bases: Vec<Frame>,
    /// Normalized exponents measured along the backward phase.
    pub exponents: Vec<f64>,
    /// Smallest angle between a cluster and the sum of the others.
    pub min_angle: f64,
    basis_matrix: DMatrix<f64>,
    dual_matrix: DMatrix<f64>,
}

/// Smallest cluster angle accepted by [`oseledec_frame`].
pub const MIN_CLUSTER_ANGLE: f64 = 1e-6;
/// Minimum depth, in blocks, of either phase.
pub const MIN_FRAME_DEPTH: u64 = 1_000;

pub fn oseledec_frame(iet: &Iet, forward_depth: u64, backward_depth: u64) -> Result<OseledecFrame> {
    if forward_depth < MIN_FRAME_DEPTH || backward_depth < MIN_FRAME_DEPTH {
        return Err(Error::InvalidInput(format!(
            "frame depths must be at least {MIN_FRAME_DEPTH} blocks"
        )));
    }
    let d = iet.d();
    let stratum = stratum_of(iet.perm());
    let g = stratum.genus;

    let mut inducer = Inducer::new(iet);
    let mut block = ZorichBlock::identity(d);
    let mut scratch = Vec::new();
    let mut logs = vec![0.0; d];
    let mut totals = vec![0.0; d];

    // unstable flag at the base
    let mut unstable = Frame::standard(d, d);
    while inducer.blocks() < backward_depth {
        inducer.next_piece(&mut block, PIECE_ENTRY_LIMIT)?;
        unstable.apply_transpose(&block.matrix, &mut scratch);
        unstable.orthonormalize(&mut logs);
        totals.iter_mut().zip(&logs).for_each(|(t, l)| *t += l);
    }
    let base = inducer.to_iet();
    let exponents: Vec<f64> = totals.iter().map(|t| t / totals[0]).collect();

    // stable flag at the base: flag of M_1 ⋯ M_F, built from the far end
    let mut future: Vec<IntMatrix> = Vec::with_capacity(forward_depth as usize);
    let target = backward_depth + forward_depth;
    while inducer.blocks() < target {
        inducer.next_piece(&mut block, PIECE_ENTRY_LIMIT)?;
        future.push(block.matrix.clone());
    }
    let mut fast = Frame::standard(d, d);
    for m in future.iter().rev() {
        fast.apply(m, &mut scratch);
        fast.orthonormalize(&mut logs);
    }

    let clusters = cluster_layout(d, g, &exponents);
    let u = unstable.to_nalgebra();
    let v = fast.to_nalgebra();
    let mut bases = Vec::with_capacity(clusters.len());
    for c in &clusters {
        let ub = u.columns(0, c.last + 1).into_owned();
        let basis = if c.first == 0 {
            ub
        } else {
            // vectors of span(u_1..u_last) orthogonal to v_1..v_{first-1}
            let constraint = v.columns(0, c.first).transpose() * &ub;
            let gram = constraint.transpose() * &constraint;
            let eig = gram.symmetric_eigen();
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            // the null space is spanned by the eigenvectors of the k smallest
            let null = eig.eigenvectors.select_columns(order[..c.dim()].iter());
            &ub * null
        };
        let mut f = Frame::from_nalgebra(&basis);
        let mut sink = vec![0.0; f.len()];
        f.orthonormalize(&mut sink);
        bases.push(f);
    }

    let mut basis_matrix = DMatrix::zeros(d, d);
    let mut col = 0;
    for b in &bases {
        for j in 0..b.len() {
            basis_matrix.column_mut(col).copy_from_slice(b.column(j));
            col += 1;
        }
    }
    let min_angle = min_cluster_angle(&bases);
    if !(min_angle >= MIN_CLUSTER_ANGLE) {
        return Err(Error::IllConditioned { angle: min_angle });
    }
    let inverse = basis_matrix
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned { angle: 0.0 })?;
    Ok(OseledecFrame {
        base,
        forward_depth,
        backward_depth,
        clusters,
        bases,
        exponents,
        min_angle,
        dual_matrix: inverse.transpose(),
        basis_matrix,
    })
}

fn cluster_layout(d: usize, g: usize, exponents: &[f64]) -> Vec<Cluster> {
    let mut out = Vec::new();
    for i in 0..g {
        out.push(Cluster {
            kind: ClusterKind::Expanding,
            first: i,
            last: i,
            exponent: exponents[i],
            label: format!("plus_{}", i + 1),
        });
    }
    if d > 2 * g {
        let (a, b) = (g, d - g - 1);
        out.push(Cluster {
            kind: ClusterKind::Neutral,
            first: a,
            last: b,
            exponent: exponents[a..=b].iter().sum::<f64>() / (b - a + 1) as f64,
            label: "neutral".into(),
        });
    }
    for i in (d - g..d).rev().collect::<Vec<_>>().into_iter().rev() {
        out.push(Cluster {
            kind: ClusterKind::Contracting,
            first: i,
            last: i,
            exponent: exponents[i],
            label: format!("minus_{}", d - i),
        });
    }
    out
}

fn min_cluster_angle(bases: &[Frame]) -> f64 {
    let mut min = f64::INFINITY;
    for (i, bi) in bases.iter().enumerate() {
        let others: Vec<Vec<f64>> = bases
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, b)| (0..b.len()).map(|k| b.column(k).to_vec()).collect::<Vec<_>>())
            .collect();
        if others.is_empty() {
            continue;
        }
        let mut rest = Frame::from_columns(&others);
        let mut sink = vec![0.0; rest.len()];
        rest.orthonormalize(&mut sink);
        let cross = bi.to_nalgebra().transpose() * rest.to_nalgebra();
        let s = cross.singular_values().max().min(1.0);
        min = min.min((1.0 - s * s).max(0.0).sqrt().asin());
    }
    min
}

impl OseledecFrame {
    pub fn dim(&self) -> usize {
        self.base.d()
    }

    /// Columns: all cluster bases side by side (cohomology coordinates).
    pub fn basis_matrix(&self) -> &DMatrix<f64> {
        &self.basis_matrix
    }

    fn cluster_columns(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.clusters[..i].iter().map(Cluster::dim).sum();
        start..start + self.clusters[i].dim()
    }

    /// Oblique projector onto cluster `i` along the others (cohomology side).
    pub fn projector(&self, i: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut mask = DMatrix::zeros(d, d);
        for k in self.cluster_columns(i) {
            mask[(k, k)] = 1.0;
        }
        &self.basis_matrix * mask * self.dual_matrix.transpose()
    }

    /// The matching projector on homology (visit) vectors: the transpose.
    pub fn homology_projector(&self, i: usize) -> DMatrix<f64> {
        self.projector(i).transpose()
    }

    /// Largest principal angle between cluster `i` here and in `other`.
    pub fn principal_angle(&self, other: &OseledecFrame, i: usize) -> f64 {
        let a = self.bases[i].to_nalgebra();
        let b = other.bases[i].to_nalgebra();
        let s = (a.transpose() * b).singular_values().min().min(1.0);
        s.acos()
    }

    /// Index of the aggregate of all contracting clusters, for convenience.
    pub fn contracting_clusters(&self) -> Vec<usize> {
        self.clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ClusterKind::Contracting)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub n: u64,
    /// `ln ‖Π_i v(n)‖` (`-inf` for a zero projection).
    pub log_norm: f64,
    /// `max_{k<=n} ‖Π_i v(k)‖`.
    pub running_max: f64,
    /// Max of `‖Π_i v(k)‖` over `k` since the previous schedule point.
    pub interval_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSeries {
    pub label: String,
    pub kind: ClusterKind,
    pub exponent: f64,
    pub points: Vec<GrowthPoint>,
}

impl ClusterSeries {
    pub fn running_max_series(&self) -> Vec<(u64, f64)> {
        self.points.iter().map(|p| (p.n, p.running_max)).collect()
    }

    /// Max over iterates `n` with `lo < n <= hi`, from the per-interval maxima.
    pub fn max_between(&self, lo: u64, hi: u64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.n > lo && p.n <= hi)
            .map(|p| p.interval_max)
            .fold(0.0, f64::max)
    }
}

/// Projections of the orbit's visit vector onto each cluster, plus the
/// aggregate of the contracting clusters (labelled `contracting`).
pub fn projected_growth(iet: &Iet, frame: &OseledecFrame, x0: f64, schedule: &[u64]) -> Result<Vec<ClusterSeries>> {
    if iet.perm() != frame.base.perm() || iet.lengths() != frame.base.lengths() {
        return Err(Error::InvalidInput(
            "projected_growth needs the exchange the frame is based at".into(),
        ));
    }
    check_schedule(schedule)?;
    let d = iet.d();
    let s = &frame.basis_matrix;
    let w = &frame.dual_matrix;
    // groups of basis columns whose homology component norms we track
    let mut groups: Vec<(Vec<usize>, String, ClusterKind, f64)> = (0..frame.clusters.len())
        .map(|i| {
            let c = &frame.clusters[i];
            (frame.cluster_columns(i).collect(), c.label.clone(), c.kind, c.exponent)
        })
        .collect();
    let contracting: Vec<usize> = frame
        .contracting_clusters()
        .into_iter()
        .flat_map(|i| frame.cluster_columns(i))
        .collect();
    if !contracting.is_empty() {
        let exponent = frame.clusters[frame.contracting_clusters()[0]].exponent;
        groups.push((contracting, "contracting".into(), ClusterKind::Contracting, exponent));
    }
    // ‖Σ_{k∈K} y_k w_k‖² = y_Kᵀ Gram_K y_K
    let grams: Vec<DMatrix<f64>> = groups
        .iter()
        .map(|(cols, ..)| {
            let sub = w.select_columns(cols.iter());
            sub.transpose() * sub
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..d).map(|a| s.row(a).iter().copied().collect()).collect();
    let columns: Vec<Vec<f64>> = (0..d).map(|k| s.column(k).iter().copied().collect()).collect();

    let mut orbit = Orbit::new(iet, x0)?;
    let mut y = vec![0.0; d];
    let mut running = vec![0.0f64; groups.len()];
    let mut interval = vec![0.0f64; groups.len()];
    let mut series: Vec<ClusterSeries> = groups
        .iter()
        .map(|(_, label, kind, exponent)| ClusterSeries {
            label: label.clone(),
            kind: *kind,
            exponent: *exponent,
            points: Vec::with_capacity(schedule.len()),
        })
        .collect();
    let norm = |gi: usize, y: &[f64]| -> f64 {
        let cols = &groups[gi].0;
        let gram = &grams[gi];
        let mut acc = 0.0;
        for (a, &ka) in cols.iter().enumerate() {
            for (b, &kb) in cols.iter().enumerate() {
                acc += y[ka] * gram[(a, b)] * y[kb];
            }
        }
        acc.max(0.0).sqrt()
    };
    let mut next = schedule.iter().copied().peekable();
    while next.peek() == Some(&0) {
        for (gi, sr) in series.iter_mut().enumerate() {
            let _ = gi;
            sr.points.push(GrowthPoint {
                n: 0,
                log_norm: f64::NEG_INFINITY,
                running_max: 0.0,
                interval_max: 0.0,
            });
        }
        next.next();
    }
    let Some(&last) = schedule.last() else {
        return Ok(series);
    };
    for n in 1..=last {
        let sym = orbit.step()?;
        y.iter_mut().zip(&rows[sym]).for_each(|(yk, r)| *yk += r);
        if n % RESYNC_PERIOD == 0 {
            resync_pairings(&mut y, &columns, orbit.visits());
        }
        for gi in 0..groups.len() {
            let v = norm(gi, &y);
            if v > running[gi] {
                running[gi] = v;
            }
            if v > interval[gi] {
                interval[gi] = v;
            }
        }
        if next.peek() == Some(&n) {
            resync_pairings(&mut y, &columns, orbit.visits());
            for (gi, sr) in series.iter_mut().enumerate() {
                let v = norm(gi, &y);
                sr.points.push(GrowthPoint {
                    n,
                    log_norm: v.ln(),
                    running_max: running[gi],
                    interval_max: interval[gi],
                });
                interval[gi] = 0.0;
            }
            next.next();
        }
    }
    Ok(series)
}

/// `y_k = ⟨s_k, v⟩` recomputed from the integer visit counts.
fn resync_pairings(y: &mut [f64], columns: &[Vec<f64>], visits: &[u64]) {
    for (yk, col) in y.iter_mut().zip(columns) {
        let (hi, lo) = compensated_affine(0.0, visits, col);
        *yk = hi + lo;
    }
}

/// Largest principal angle per cluster between the frame at depths `(F, B)`
/// and at `(2F, 2B)`, both based at the exchange `2B` blocks past `iet`.
pub fn frame_convergence(iet: &Iet, forward_depth: u64, backward_depth: u64) -> Result<Vec<f64>> {
    let mut inducer = Inducer::new(iet);
    let mut block = ZorichBlock::identity(iet.d());
    while inducer.blocks() < backward_depth {
        inducer.next_piece(&mut block, PIECE_ENTRY_LIMIT)?;
    }
    let shallow = oseledec_frame(&inducer.to_iet(), forward_depth, backward_depth)?;
    let deep = oseledec_frame(iet, 2 * forward_depth, 2 * backward_depth)?;
    Ok((0..shallow.clusters.len())
        .map(|i| shallow.principal_angle(&deep, i))
        .collect())
}

/// `χ_{I_α} − |I_α|` for every symbol `α`, in symbol order.
pub fn interval_indicators(iet: &Iet) -> Vec<StepFunction> {
    (0..iet.d())
        .map(|a| {
            let mut c = vec![0.0; iet.d()];
            c[a] = 1.0;
            let f = StepFunction::on_intervals(iet, &c).expect("top breakpoints are increasing");
            mean_zero(&f)
        })
        .collect()
}

/// Observables used by the ensemble estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    /// Mean-zero indicator of the top interval of a symbol (0-based).
    Interval(usize),
    /// Mean-zero indicator of `[a, b)`.
    Indicator { a: f64, b: f64 },
}

impl Observable {
    pub fn build(&self, iet: &Iet) -> Result<StepFunction> {
        match *self {
            Observable::Interval(k) => interval_indicators(iet)
                .into_iter()
                .nth(k)
                .ok_or_else(|| Error::InvalidInput(format!("no interval {}", k + 1))),
            Observable::Indicator { a, b } => Ok(mean_zero(&StepFunction::indicator(a, b)?)),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Observable::Interval(k) => format!("interval_{}", k + 1),
            Observable::Indicator { a, b } => format!("indicator_{a}_{b}"),
        }
    }
}

/// Starting point of the orbit used with seed `seed`. Independent of the
/// stream that draws the lengths.
pub fn seeded_start(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed ^ 0x5DEE_CE66_D1CE_5EED);
    unit_point(&mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeClass {
    pub fit: SlopeFit,
    /// Index into `[λ_1, …, λ_g, 0]` of the nearest exponent.
    pub nearest: usize,
    /// Set when a mean-zero observable sits below the `λ_2` cluster.
    pub lower_cluster: bool,
}

/// Classifies a mean-zero observable's slope against `λ_1..λ_g`.
pub fn classify_slope(fit: SlopeFit, lambda_upper: &[f64]) -> SlopeClass {
    let nearest = nearest_cluster(fit.exponent, lambda_upper);
    SlopeClass {
        fit,
        nearest,
        lower_cluster: nearest > 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSlope {
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SlopeFit>,
    /// Running maxima of `|S_n|` per seed.
    pub per_seed_series: Vec<Vec<(u64, f64)>>,
    /// Fit of the pointwise geometric mean of the running maxima.
    pub pooled: SlopeFit,
    pub pooled_series: Vec<(u64, f64)>,
}

/// Deviation slope over an ensemble of seeded exchanges, one orbit each.
///
/// A single orbit crosses only a handful of Zorich blocks per decade of
/// `N`, so its slope scatters widely; averaging `ln max|S_n|` over seeds
/// estimates the typical growth rate.
pub fn ensemble_slope(
    perm: &Permutation,
    seeds: &[u64],
    observable: Observable,
    schedule: &[u64],
    window: FitWindow,
    exec: Execution,
) -> Result<EnsembleSlope> {
    let series = exec.try_map(seeds.to_vec(), |seed| {
        let iet = seeded_iet(perm, seed)?;
        ensemble_member(&iet, observable, seeded_start(seed), schedule)
    })?;
    pool(seeds, series, window)
}

/// As [`ensemble_slope`] on one fixed exchange, with orbits started at
/// `seeded_start(seed)`.
pub fn orbit_ensemble_slope(
    iet: &Iet,
    seeds: &[u64],
    observable: Observable,
    schedule: &[u64],
    window: FitWindow,
    exec: Execution,
) -> Result<EnsembleSlope> {
    let series = exec.try_map(seeds.to_vec(), |seed| {
        ensemble_member(iet, observable, seeded_start(seed), schedule)
    })?;
    pool(seeds, series, window)
}

fn ensemble_member(iet: &Iet, observable: Observable, x0: f64, schedule: &[u64]) -> Result<Vec<(u64, f64)>> {
    let f = observable.build(iet)?;
    Ok(running_max_series(&birkhoff_series(iet, &f, x0, schedule)?))
}

fn pool(seeds: &[u64], series: Vec<Vec<(u64, f64)>>, window: FitWindow) -> Result<EnsembleSlope> {
    let per_seed = series
        .iter()
        .map(|s| deviation_slope(s, window))
        .collect::<Result<Vec<_>>>()?;
    let pooled_series = geometric_mean_series(&series);
    let pooled = deviation_slope(&pooled_series, window)?;
    Ok(EnsembleSlope {
        seeds: seeds.to_vec(),
        per_seed,
        per_seed_series: series,
        pooled,
        pooled_series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_zero_examples() {
        let f = StepFunction::indicator(0.0, 0.3).unwrap();
        let g = mean_zero(&f);
        assert!((g.values()[0] - 0.7).abs() < 1e-15);
        assert!((g.values()[1] + 0.3).abs() < 1e-15);
        assert_eq!(mean_zero(&g), g);
        let c = StepFunction::new(vec![0.5], vec![2.0, 2.0]).unwrap();
        assert!(mean_zero(&c).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_function_validation() {
        assert!(StepFunction::new(vec![0.5, 0.4], vec![0.0, 1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![0.5], vec![1.0]).is_err());
        assert!(StepFunction::indicator(0.4, 0.4).is_err());
        let f = StepFunction::indicator(0.25, 0.5).unwrap();
        assert_eq!(f.eval(0.1), 0.0);
        assert_eq!(f.eval(0.25), 1.0);
        assert_eq!(f.eval(0.5), 0.0);
    }

    #[test]
    fn zero_observable_has_zero_sums() {
        let iet = seeded_iet(&Permutation::rotation_class(4).unwrap(), 9).unwrap();
        let f = StepFunction::new(vec![], vec![0.0]).unwrap();
        let pts = birkhoff_series(&iet, &f, 0.3, &[1, 10, 100]).unwrap();
        assert!(pts.iter().all(|p| p.sum == 0.0 && p.running_max == 0.0));
        let f = StepFunction::indicator(0.0, 0.5).unwrap();
        assert!(birkhoff_series(&iet, &f, 0.3, &[10]).is_err());
    }

    #[test]
    fn interval_observables_match_visit_vectors() {
        let iet = seeded_iet(&Permutation::rotation_class(4).unwrap(), 4).unwrap();
        let coeffs: Vec<f64> = (0..4).map(|a| a as f64 - 1.5).collect();
        let f = StepFunction::on_intervals(&iet, &coeffs).unwrap();
        let f = mean_zero(&f);
        let shift = coeffs[0] - f.values()[iet.perm().top().iter().position(|&s| s == 0).unwrap()];
        let pts = birkhoff_series(&iet, &f, 0.123, &[5_000]).unwrap();
        let v = iet.visit_vector(0.123, 5_000).unwrap();
        let direct: f64 = v.iter().zip(&coeffs).map(|(&c, &x)| c as f64 * (x - shift)).sum();
        assert!((pts[0].sum - direct).abs() < 1e-9);
    }

    #[test]
    fn slope_recovers_power_law() {
        let sched = geometric_schedule(10, 10_000_000, 10);
        let series: Vec<(u64, f64)> = sched.iter().map(|&n| (n, (n as f64).powf(0.5))).collect();
        let fit = deviation_slope(&series, FitWindow::default_for(&sched).unwrap()).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-6);
        let noisy: Vec<(u64, f64)> = sched
            .iter()
            .enumerate()
            .map(|(k, &n)| (n, 3.0 + 0.1 * ((k * 7919) % 13) as f64 / 13.0))
            .collect();
        let fit = deviation_slope(&noisy, FitWindow::default_for(&sched).unwrap()).unwrap();
        assert!(fit.exponent.abs() < 0.01);
    }

    #[test]
    fn slope_rejects_short_windows() {
        let series: Vec<(u64, f64)> = (1..=100).map(|n| (n * 10, n as f64)).collect();
        assert!(matches!(
            deviation_slope(&series, FitWindow { lo: 10, hi: 1000 }),
            Err(Error::WindowTooShort { .. })
        ));
    }

    #[test]
    fn schedule_is_geometric() {
        let s = geometric_schedule(100, 100_000, 4);
        assert_eq!(s.first(), Some(&100));
        assert_eq!(s.last(), Some(&100_000));
        assert_eq!(s.len(), 13);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn torus_frame_is_two_lines() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let iet = Iet::new(Permutation::rotation_class(2).unwrap(), &[phi - 1.0, 2.0 - phi]).unwrap();
        let frame = oseledec_frame(&iet, 1_000, 1_000).unwrap();
        assert_eq!(frame.clusters.len(), 2);
        assert_eq!(frame.clusters[0].kind, ClusterKind::Expanding);
        assert_eq!(frame.clusters[1].kind, ClusterKind::Contracting);
        assert!((frame.exponents[1] + 1.0).abs() < 1e-9);
        let p = frame.projector(0);
        assert!((&p * &p - &p).norm() < 1e-8);
        let sum = frame.projector(0) + frame.projector(1);
        assert!((sum - DMatrix::<f64>::identity(2, 2)).norm() < 1e-8);
    }

    #[test]
    fn shallow_frames_are_rejected() {
        let iet = seeded_iet(&Permutation::rotation_class(4).unwrap(), 1).unwrap();
        assert!(oseledec_frame(&iet, 10, 10_000).is_err());
    }
}

//! Interval exchange transformations and their combinatorial data.
//!
//! Symbols are stored 0-based internally; every constructor and serializer
//! that faces users speaks 1-based symbols, matching the usual notation
//! `(1 2 3 4 / 4 3 2 1)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired top/bottom orders of `d` symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    top: Vec<usize>,
    bottom: Vec<usize>,
}

impl Permutation {
    /// Builds an irreducible permutation from 1-based symbol orders.
    pub fn new(top: &[usize], bottom: &[usize]) -> Result<Self> {
        let d = top.len();
        if d < 2 || bottom.len() != d {
            return Err(Error::NotBijection(format!(
                "need two orders of equal length d >= 2, got {} and {}",
                top.len(),
                bottom.len()
            )));
        }
        let to_zero_based = |row: &[usize], name: &str| -> Result<Vec<usize>> {
            let mut seen = vec![false; d];
            row.iter()
                .map(|&s| {
                    if s == 0 || s > d || seen[s - 1] {
                        return Err(Error::NotBijection(format!(
                            "{name} row {row:?} is not a bijection of 1..={d}"
                        )));
                    }
                    seen[s - 1] = true;
                    Ok(s - 1)
                })
                .collect()
        };
        let perm = Permutation {
            top: to_zero_based(top, "top")?,
            bottom: to_zero_based(bottom, "bottom")?,
        };
        if let Some(prefix) = perm.reducible_prefix() {
            return Err(Error::Reducible { prefix });
        }
        Ok(perm)
    }

    /// The standard permutation `(1 .. d / d .. 1)`.
    pub fn rotation_class(d: usize) -> Result<Self> {
        let top: Vec<usize> = (1..=d).collect();
        let bottom: Vec<usize> = (1..=d).rev().collect();
        Self::new(&top, &bottom)
    }

    /// Parses `"1,2,3,4"` style lists for the two rows.
    pub fn parse(top: &str, bottom: &str) -> Result<Self> {
        let parse_row = |s: &str| -> Result<Vec<usize>> {
            s.split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::NotBijection(format!("bad symbol {tok:?} in {s:?}")))
                })
                .collect()
        };
        Self::new(&parse_row(top)?, &parse_row(bottom)?)
    }

    fn reducible_prefix(&self) -> Option<usize> {
        let d = self.d();
        // balance[s] is +1 once seen on top only, -1 once seen on bottom only.
        let mut balance = vec![0i8; d];
        let mut unmatched = 0usize;
        for k in 0..d - 1 {
            for (sym, delta) in [(self.top[k], 1i8), (self.bottom[k], -1i8)] {
                let before = balance[sym];
                balance[sym] += delta;
                if before == 0 {
                    unmatched += 1;
                } else if balance[sym] == 0 {
                    unmatched -= 1;
                }
            }
            if unmatched == 0 {
                return Some(k + 1);
            }
        }
        None
    }

    pub fn d(&self) -> usize {
        self.top.len()
    }

    /// 0-based top row.
    pub fn top(&self) -> &[usize] {
        &self.top
    }

    /// 0-based bottom row.
    pub fn bottom(&self) -> &[usize] {
        &self.bottom
    }

    pub fn top_one_based(&self) -> Vec<usize> {
        self.top.iter().map(|s| s + 1).collect()
    }

    pub fn bottom_one_based(&self) -> Vec<usize> {
        self.bottom.iter().map(|s| s + 1).collect()
    }

    /// Position of each symbol in the top row.
    pub fn top_positions(&self) -> Vec<usize> {
        positions(&self.top)
    }

    pub fn bottom_positions(&self) -> Vec<usize> {
        positions(&self.bottom)
    }

    /// The permutation of the inverse exchange: rows swapped.
    pub fn inverse(&self) -> Permutation {
        Permutation {
            top: self.bottom.clone(),
            bottom: self.top.clone(),
        }
    }

    /// Compact identifier used in reports, e.g. `1-2-3-4/4-3-2-1`.
    pub fn id(&self) -> String {
        let join = |row: &[usize]| {
            row.iter()
                .map(|s| (s + 1).to_string())
                .collect::<Vec<_>>()
                .join("-")
        };
        format!("{}/{}", join(&self.top), join(&self.bottom))
    }

    /// The two rows as comma-separated 1-based symbol lists.
    pub fn to_lists(&self) -> (String, String) {
        let join = |row: &[usize]| {
            row.iter()
                .map(|s| (s + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        (join(&self.top), join(&self.bottom))
    }

    pub(crate) fn rows_mut(&mut self) -> (&mut Vec<usize>, &mut Vec<usize>) {
        (&mut self.top, &mut self.bottom)
    }
}

fn positions(row: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; row.len()];
    for (i, &s) in row.iter().enumerate() {
        pos[s] = i;
    }
    pos
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (top, bottom) = self.to_lists();
        write!(f, "({top} / {bottom})")
    }
}

impl Serialize for Permutation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PermutationRepr {
            top: self.top_one_based(),
            bottom: self.bottom_one_based(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PermutationRepr::deserialize(d)?;
        Permutation::new(&repr.top, &repr.bottom).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct PermutationRepr {
    top: Vec<usize>,
    bottom: Vec<usize>,
}

/// Stratum data of the suspension of a permutation.
///
/// `kappa` uses the quadratic-differential convention (orders of the zeros of
/// the square, summing to `4g - 4`); `abelian_orders` carries the same zeros
/// as orders of the abelian differential. Removable singularities (order 0)
/// are counted in `sigma` and `marked_points` but not listed in the orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumSignature {
    pub kappa: Vec<u32>,
    pub abelian_orders: Vec<u32>,
    pub genus: usize,
    pub sigma: usize,
    pub marked_points: usize,
}

/// Counts the singularities of the suspension by identifying the vertices of
/// the Masur polygon under the side gluings.
///
/// Vertex `T_i` is the right end of the `i`-th top side, `B_j` likewise on the
/// bottom; `T_0 = B_0` and `T_d = B_d`. A class with cone angle `2π(k+1)`
/// carries `k + 1` interior top vertices (one downward vertical separatrix
/// each) and as many interior bottom vertices.
pub fn stratum_of(perm: &Permutation) -> StratumSignature {
    let d = perm.d();
    let top_idx = |i: usize| i;
    let bot_idx = |j: usize| d + 1 + j;
    let mut uf = UnionFind::new(2 * (d + 1));
    uf.union(top_idx(0), bot_idx(0));
    uf.union(top_idx(d), bot_idx(d));
    let tpos = perm.top_positions();
    let bpos = perm.bottom_positions();
    for sym in 0..d {
        let (i, j) = (tpos[sym] + 1, bpos[sym] + 1);
        uf.union(top_idx(i - 1), bot_idx(j - 1));
        uf.union(top_idx(i), bot_idx(j));
    }
    let mut top_count = std::collections::BTreeMap::<usize, u32>::new();
    let mut bot_count = std::collections::BTreeMap::<usize, u32>::new();
    let mut classes = std::collections::BTreeSet::new();
    for v in 0..2 * (d + 1) {
        classes.insert(uf.find(v));
    }
    for i in 1..d {
        *top_count.entry(uf.find(top_idx(i))).or_default() += 1;
        *bot_count.entry(uf.find(bot_idx(i))).or_default() += 1;
    }
    debug_assert_eq!(top_count, bot_count, "separatrix counts disagree");
    let sigma = classes.len();
    let genus = (d + 1 - sigma) / 2;
    let mut abelian: Vec<u32> = classes
        .iter()
        .map(|c| top_count.get(c).copied().unwrap_or(0).saturating_sub(1))
        .collect();
    abelian.sort_unstable_by(|a, b| b.cmp(a));
    let marked_points = abelian.iter().filter(|&&k| k == 0).count();
    abelian.retain(|&k| k > 0);
    StratumSignature {
        kappa: abelian.iter().map(|k| 2 * k).collect(),
        abelian_orders: abelian,
        genus,
        sigma,
        marked_points,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// How `evaluate` treats points sitting exactly on an interior breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BreakpointConvention {
    /// Intervals are `[a_j, a_{j+1})`.
    #[default]
    RightContinuous,
    /// Refuse to evaluate on a breakpoint.
    Strict,
}

/// Renormalized lengths below this abort the induction. Every unit-sum
/// length carries an absolute rounding error of order `ε`, so anything this
/// small is cancellation noise (typically a connection in a rational seed)
/// and the next block would otherwise take ~`1/length` steps.
pub const DEGENERATE_LENGTH: f64 = 1e4 * f64::EPSILON;

/// An interval exchange on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iet {
    perm: Permutation,
    lengths: Vec<f64>,
    scale_log: f64,
    top_starts: Vec<f64>,
    translations: Vec<f64>,
}

impl Iet {
    /// Normalizes `lengths` to unit total; `scale_log` starts at the log of
    /// the original total.
    pub fn new(perm: Permutation, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != perm.d() {
            return Err(Error::InvalidInput(format!(
                "{} lengths for a permutation on {} symbols",
                lengths.len(),
                perm.d()
            )));
        }
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidInput(format!("length {bad} is not positive")));
        }
        let total: f64 = lengths.iter().sum();
        let lengths: Vec<f64> = lengths.iter().map(|l| l / total).collect();
        Ok(Self::from_normalized(perm, lengths, total.ln()))
    }

    pub(crate) fn from_normalized(perm: Permutation, lengths: Vec<f64>, scale_log: f64) -> Self {
        let d = perm.d();
        let mut top_start = vec![0.0; d];
        let mut top_starts = Vec::with_capacity(d + 1);
        let mut acc = 0.0;
        for &s in perm.top() {
            top_starts.push(acc);
            top_start[s] = acc;
            acc += lengths[s];
        }
        top_starts.push(acc);
        let mut translations = vec![0.0; d];
        let mut acc = 0.0;
        for &s in perm.bottom() {
            translations[s] = acc - top_start[s];
            acc += lengths[s];
        }
        Iet {
            perm,
            lengths,
            scale_log,
            top_starts,
            translations,
        }
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    /// Lengths indexed by (0-based) symbol.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn scale_log(&self) -> f64 {
        self.scale_log
    }

    pub fn d(&self) -> usize {
        self.perm.d()
    }

    /// Translation applied to each symbol's interval.
    pub fn translations(&self) -> &[f64] {
        &self.translations
    }

    /// Left endpoints of the top intervals in top order, followed by the
    /// total length.
    pub fn top_breakpoints(&self) -> &[f64] {
        &self.top_starts
    }

    /// The inverse exchange (rows swapped, same lengths).
    pub fn inverse(&self) -> Iet {
        Iet::from_normalized(self.perm.inverse(), self.lengths.clone(), self.scale_log)
    }

    /// Symbol of the top interval containing `x` (right-continuous).
    pub fn interval_of(&self, x: f64) -> usize {
        let d = self.d();
        let mut pos = 0;
        while pos + 1 < d && x >= self.top_starts[pos + 1] {
            pos += 1;
        }
        self.perm.top()[pos]
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.evaluate_with(x, BreakpointConvention::RightContinuous)
    }

    pub fn evaluate_with(&self, x: f64, convention: BreakpointConvention) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidInput(format!("x = {x} is outside [0, 1)")));
        }
        if convention == BreakpointConvention::Strict {
            if let Some(k) = (1..self.d()).find(|&k| self.top_starts[k] == x) {
                return Err(Error::OnDiscontinuity { x, breakpoint: k });
            }
        }
        let sym = self.interval_of(x);
        Ok((x + self.translations[sym]).clamp(0.0, ONE_MINUS_ULP))
    }

    /// Visit counts of the first `n` iterates of `x0` (including `x0`).
    pub fn visit_vector(&self, x0: f64, n: u64) -> Result<Vec<u64>> {
        let mut orbit = Orbit::new(self, x0)?;
        for _ in 0..n {
            orbit.step()?;
        }
        Ok(orbit.visits().to_vec())
    }

    /// JSON form `{top, bottom, lengths}` with 1-based symbols.
    pub fn to_json(&self) -> IetJson {
        IetJson {
            top: self.perm.top_one_based(),
            bottom: self.perm.bottom_one_based(),
            lengths: self.lengths.clone(),
        }
    }
}

const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IetJson {
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl TryFrom<IetJson> for Iet {
    type Error = Error;

    fn try_from(j: IetJson) -> Result<Iet> {
        Iet::new(Permutation::new(&j.top, &j.bottom)?, &j.lengths)
    }
}

/// Iterates the exchange with a compensated orbit point.
///
/// The point is carried as an unevaluated sum `hi + lo`; every
/// `RESYNC_PERIOD` iterates it is rebuilt from the starting point and the
/// visit counts, so rounding drift cannot accumulate.
#[derive(Debug, Clone)]
pub struct Orbit<'a> {
    iet: &'a Iet,
    x0: f64,
    hi: f64,
    lo: f64,
    visits: Vec<u64>,
    n: u64,
}

pub const RESYNC_PERIOD: u64 = 1_000_000;

impl<'a> Orbit<'a> {
    pub fn new(iet: &'a Iet, x0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x0) {
            return Err(Error::InvalidInput(format!("x0 = {x0} is outside [0, 1)")));
        }
        Ok(Orbit {
            iet,
            x0,
            hi: x0,
            lo: 0.0,
            visits: vec![0; iet.d()],
            n: 0,
        })
    }

    /// Current point (rounded to a single float).
    pub fn point(&self) -> f64 {
        self.hi + self.lo
    }

    /// Number of iterates taken so far.
    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// Records the current point's interval and moves to its image. Returns
    /// the visited symbol.
    #[inline]
    pub fn step(&mut self) -> Result<usize> {
        let starts = &self.iet.top_starts;
        let d = self.iet.d();
        let mut pos = 0;
        while pos + 1 < d {
            let b = starts[pos + 1];
            if self.hi > b || (self.hi == b && self.lo > 0.0) {
                pos += 1;
            } else if self.hi == b && self.lo == 0.0 {
                return Err(Error::HitDiscontinuity { index: self.n });
            } else {
                break;
            }
        }
        let sym = self.iet.perm.top()[pos];
        self.visits[sym] += 1;
        self.n += 1;
        let (s, e) = two_sum(self.hi, self.iet.translations[sym]);
        let lo = self.lo + e;
        let (hi, lo) = fast_two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
        if self.n.is_multiple_of(RESYNC_PERIOD) {
            self.resync();
        }
        Ok(sym)
    }

    fn resync(&mut self) {
        let (hi, lo) =
            compensated_affine(self.x0, &self.visits, &self.iet.translations);
        self.hi = hi;
        self.lo = lo;
    }
}

#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// `x0 + Σ counts[k]·steps[k]` as a double-double, using exact products.
pub(crate) fn compensated_affine(x0: f64, counts: &[u64], steps: &[f64]) -> (f64, f64) {
    let mut hi = x0;
    let mut lo = 0.0;
    for (&c, &w) in counts.iter().zip(steps) {
        let c = c as f64;
        let p = c * w;
        let p_err = c.mul_add(w, -p);
        let (s, e) = two_sum(hi, p);
        hi = s;
        lo += e + p_err;
    }
    fast_two_sum(hi, lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap(a: f64, b: f64) -> Iet {
        Iet::new(Permutation::new(&[1, 2], &[2, 1]).unwrap(), &[a, b]).unwrap()
    }

    #[test]
    fn construction_examples() {
        assert_eq!(Permutation::new(&[1, 2], &[2, 1]).unwrap().d(), 2);
        assert_eq!(Permutation::new(&[1, 2, 3, 4], &[4, 3, 2, 1]).unwrap().d(), 4);
        assert_eq!(
            Permutation::new(&[1, 2, 3], &[1, 3, 2]),
            Err(Error::Reducible { prefix: 1 })
        );
        assert_eq!(
            Permutation::new(&[1, 2, 3, 4], &[2, 1, 4, 3]),
            Err(Error::Reducible { prefix: 2 })
        );
        assert!(matches!(
            Permutation::new(&[1, 2, 2], &[3, 2, 1]),
            Err(Error::NotBijection(_))
        ));
        assert!(matches!(
            Permutation::new(&[1], &[1]),
            Err(Error::NotBijection(_))
        ));
        assert!(matches!(
            Permutation::new(&[1, 2, 3], &[3, 2]),
            Err(Error::NotBijection(_))
        ));
    }

    #[test]
    fn parse_and_lists_agree() {
        let p = Permutation::parse("1, 2,3,4", "4,3,2,1").unwrap();
        assert_eq!(p.to_lists(), ("1,2,3,4".into(), "4,3,2,1".into()));
        assert_eq!(p.id(), "1-2-3-4/4-3-2-1");
        assert!(Permutation::parse("1,x", "2,1").is_err());
    }

    #[test]
    fn torus_stratum() {
        let s = stratum_of(&Permutation::new(&[1, 2], &[2, 1]).unwrap());
        assert_eq!((s.genus, s.sigma, s.marked_points), (1, 1, 1));
        assert!(s.kappa.is_empty());
        let s = stratum_of(&Permutation::rotation_class(3).unwrap());
        assert_eq!((s.genus, s.sigma, s.marked_points), (1, 2, 2));
    }

    #[test]
    fn evaluate_examples() {
        let t = swap(0.6, 0.4);
        assert!((t.evaluate(0.1).unwrap() - 0.5).abs() < 1e-15);
        assert!((t.evaluate(0.8).unwrap() - 0.2).abs() < 1e-15);
        // right-continuous at the breakpoint
        assert!((t.evaluate(0.6).unwrap() - 0.0).abs() < 1e-15);
        assert_eq!(
            t.evaluate_with(0.6, BreakpointConvention::Strict),
            Err(Error::OnDiscontinuity { x: 0.6, breakpoint: 1 })
        );
        assert!(t.evaluate(1.0).is_err());
    }

    #[test]
    fn inverse_undoes_evaluate() {
        let t = Iet::new(
            Permutation::new(&[1, 2, 3, 4], &[4, 3, 2, 1]).unwrap(),
            &[0.2, 0.3, 0.1, 0.4],
        )
        .unwrap();
        let inv = t.inverse();
        for k in 0..97 {
            let x = (k as f64 + 0.37) / 97.0;
            let y = t.evaluate(x).unwrap();
            assert!((inv.evaluate(y).unwrap() - x).abs() < 1e-14);
        }
    }

    #[test]
    fn visit_vector_basics() {
        let t = swap(0.6, 0.4);
        assert_eq!(t.visit_vector(0.05, 0).unwrap(), vec![0, 0]);
        let v = t.visit_vector(0.05, 10).unwrap();
        assert_eq!(v.iter().sum::<u64>(), 10);
        assert!((v[0] as f64 - 6.0).abs() <= 1.0 && (v[1] as f64 - 4.0).abs() <= 1.0);
    }

    #[test]
    fn orbit_reports_discontinuity() {
        let t = swap(0.5, 0.5);
        // 0.25 -> 0.75 -> 0.25 never hits; 0.5 is a breakpoint itself.
        assert!(t.visit_vector(0.25, 100).is_ok());
        assert_eq!(
            t.visit_vector(0.0, 3).map_err(|e| e.to_string()),
            Err(Error::HitDiscontinuity { index: 1 }.to_string())
        );
    }

    #[test]
    fn lengths_are_normalized() {
        let t = Iet::new(Permutation::rotation_class(4).unwrap(), &[2.0, 3.0, 1.0, 4.0]).unwrap();
        assert!((t.lengths().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((t.scale_log() - 10f64.ln()).abs() < 1e-15);
        assert!(Iet::new(Permutation::rotation_class(2).unwrap(), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = Iet::new(Permutation::rotation_class(4).unwrap(), &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let s = serde_json::to_string(&t.to_json()).unwrap();
        let back: IetJson = serde_json::from_str(&s).unwrap();
        assert_eq!(Iet::try_from(back).unwrap(), t);
    }
}

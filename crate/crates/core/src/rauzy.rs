//! Rauzy-Veech induction, Zorich acceleration and the induced integer
//! cocycle.
//!
//! Conventions: with `α` the last symbol of the top row and `β` the last
//! symbol of the bottom row, the longer of the two wins. A `Top` step
//! (`λ_α > λ_β`) sets `λ_α -= λ_β` and moves `β` in the bottom row to just
//! after `α`; a `Bottom` step is the mirror image. The step matrix is
//! `E = I + e_{winner, loser}` and satisfies `λ_before = E · λ_after`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iet::{Iet, Permutation, DEGENERATE_LENGTH};
use crate::linalg::IntMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    Top,
    Bottom,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Top => "T",
            StepKind::Bottom => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InductionStep {
    pub kind: StepKind,
    pub winner: usize,
    pub loser: usize,
    /// `I + e_{winner, loser}`.
    pub matrix: IntMatrix,
    pub new_perm: Permutation,
}

/// A maximal run of same-kind Rauzy steps.
///
/// `matrix` is the ordered product `E_1 ⋯ E_count`, so the lengths before the
/// block equal `matrix` times the (unnormalized) lengths after it. A block is
/// cut early when an entry would pass [`BLOCK_ENTRY_LIMIT`]; only then may the
/// next block have the same kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ZorichBlock {
    pub kind: StepKind,
    pub count: u64,
    pub matrix: IntMatrix,
    /// Set when the block was cut at the entry limit.
    pub split: bool,
}

impl ZorichBlock {
    pub fn identity(d: usize) -> Self {
        ZorichBlock {
            kind: StepKind::Top,
            count: 0,
            matrix: IntMatrix::identity(d),
            split: false,
        }
    }
}

pub const BLOCK_ENTRY_LIMIT: i64 = 1 << 62;

/// Lengths closer than this many ulps (relative) count as a tie in float
/// mode.
pub const TIE_ULPS: f64 = 4.0;

/// Rearranges the rows for a step of the given kind and returns
/// `(winner, loser)`.
pub(crate) fn apply_move(perm: &mut Permutation, kind: StepKind) -> (usize, usize) {
    let (top, bottom) = perm.rows_mut();
    let d = top.len();
    let alpha = top[d - 1];
    let beta = bottom[d - 1];
    match kind {
        StepKind::Top => {
            bottom.pop();
            let at = bottom.iter().position(|&s| s == alpha).expect("alpha in bottom row");
            bottom.insert(at + 1, beta);
            (alpha, beta)
        }
        StepKind::Bottom => {
            top.pop();
            let at = top.iter().position(|&s| s == beta).expect("beta in top row");
            top.insert(at + 1, alpha);
            (beta, alpha)
        }
    }
}

/// How [`Inducer`] keeps its lengths of order one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Divide by the total after every step. The rounding this adds is what
    /// lets long runs go on: exact arithmetic on floats is exact rational
    /// induction, which always ends in a tie.
    #[default]
    UnitSum,
    /// Multiply by powers of two only, keeping the total in `[1/2, 1)`.
    /// Subtraction is then the only rounding, and dyadic lengths with a
    /// common denominator of at most `2^53` are induced exactly.
    Dyadic,
}

/// Mutable float-mode induction state.
#[derive(Debug, Clone)]
pub struct Inducer {
    perm: Permutation,
    lengths: Vec<f64>,
    scaling: Scaling,
    /// Log of the factor taking `lengths` to the true lengths, up to the
    /// pending factors below.
    scale_log: f64,
    pending_scale: f64,
    pending_exp: i64,
    steps: u64,
    blocks: u64,
}

/// `e` with `x · 2^{-e} ∈ [1/2, 1)`, for positive normal `x`.
#[inline]
fn binary_exponent(x: f64) -> i64 {
    ((x.to_bits() >> 52) & 0x7ff) as i64 - 1022
}

#[inline]
fn pow2(e: i64) -> f64 {
    f64::from_bits(((e + 1023) as u64) << 52)
}

impl Inducer {
    pub fn new(iet: &Iet) -> Self {
        Inducer {
            perm: iet.perm().clone(),
            lengths: iet.lengths().to_vec(),
            scaling: Scaling::UnitSum,
            scale_log: iet.scale_log(),
            pending_scale: 1.0,
            pending_exp: 0,
            steps: 0,
            blocks: 0,
        }
    }

    /// Starts from unnormalized positive `lengths`.
    pub fn from_lengths(perm: Permutation, lengths: &[f64], scaling: Scaling) -> Result<Self> {
        if lengths.len() != perm.d() || lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput(
                "induction needs d positive finite lengths".into(),
            ));
        }
        let mut ind = Inducer {
            perm,
            lengths: lengths.to_vec(),
            scaling,
            scale_log: 0.0,
            pending_scale: 1.0,
            pending_exp: 0,
            steps: 0,
            blocks: 0,
        };
        ind.rescale(lengths.iter().sum());
        Ok(ind)
    }

    #[inline]
    fn rescale(&mut self, total: f64) {
        match self.scaling {
            Scaling::UnitSum => {
                let inv = 1.0 / total;
                self.lengths.iter_mut().for_each(|l| *l *= inv);
                self.pending_scale *= total;
                if self.pending_scale < 1e-250 {
                    self.scale_log += self.pending_scale.ln();
                    self.pending_scale = 1.0;
                }
            }
            Scaling::Dyadic => {
                let e = binary_exponent(total);
                if e != 0 {
                    let f = pow2(-e);
                    self.lengths.iter_mut().for_each(|l| *l *= f);
                    self.pending_exp += e;
                }
            }
        }
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    /// Current lengths: unit total under [`Scaling::UnitSum`], total in
    /// `[1/2, 1)` under [`Scaling::Dyadic`].
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Log of the total length of the current exchange.
    pub fn scale_log(&self) -> f64 {
        let base = self.scale_log + self.pending_scale.ln() + self.pending_exp as f64 * std::f64::consts::LN_2;
        match self.scaling {
            Scaling::UnitSum => base,
            Scaling::Dyadic => base + self.lengths.iter().sum::<f64>().ln(),
        }
    }

    /// Rauzy steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Zorich blocks taken so far.
    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    /// The current exchange, renormalized to unit length.
    pub fn to_iet(&self) -> Iet {
        let lengths = match self.scaling {
            Scaling::UnitSum => self.lengths.clone(),
            Scaling::Dyadic => {
                let total: f64 = self.lengths.iter().sum();
                self.lengths.iter().map(|l| l / total).collect()
            }
        };
        Iet::from_normalized(self.perm.clone(), lengths, self.scale_log())
    }

    /// Kind of the next step, or a tie.
    #[inline]
    pub fn peek(&self) -> Result<StepKind> {
        let d = self.perm.d();
        let a = self.lengths[self.perm.top()[d - 1]];
        let b = self.lengths[self.perm.bottom()[d - 1]];
        if (a - b).abs() <= TIE_ULPS * f64::EPSILON * a.max(b) {
            Err(Error::Tie { step: self.steps })
        } else if a > b {
            Ok(StepKind::Top)
        } else {
            Ok(StepKind::Bottom)
        }
    }

    /// One Rauzy step in place; returns `(kind, winner, loser)`.
    #[inline]
    pub fn step(&mut self) -> Result<(StepKind, usize, usize)> {
        let kind = self.peek()?;
        let (winner, loser) = apply_move(&mut self.perm, kind);
        self.lengths[winner] -= self.lengths[loser];
        let total: f64 = self.lengths.iter().sum();
        self.steps += 1;
        let shortest = self.lengths[winner];
        if shortest < DEGENERATE_LENGTH * total {
            return Err(Error::DegenerateLength {
                step: self.steps,
                value: shortest / total,
            });
        }
        if self.scaling == Scaling::UnitSum || total < 0.5 {
            self.rescale(total);
        }
        Ok((kind, winner, loser))
    }

    /// One Zorich block, written into `block` (whose buffer is reused).
    /// Blocks whose entries would pass [`BLOCK_ENTRY_LIMIT`] are cut there,
    /// with `block.split` set.
    pub fn next_block(&mut self, block: &mut ZorichBlock) -> Result<()> {
        self.next_piece(block, BLOCK_ENTRY_LIMIT)?;
        if block.split {
            self.blocks += 1;
        }
        Ok(())
    }

    /// Like [`next_block`](Self::next_block), but stops as soon as an entry
    /// would exceed `limit`. A cut piece has `split` set and the rest of the
    /// block comes from the following calls; [`blocks`](Self::blocks) only
    /// advances when a block is complete. Keeps the condition number of each
    /// piece near `limit²`, which is what a float frame can absorb.
    pub fn next_piece(&mut self, block: &mut ZorichBlock, limit: i64) -> Result<()> {
        let d = self.perm.d();
        if block.matrix.n() != d {
            block.matrix = IntMatrix::identity(d);
        } else {
            block.matrix.set_identity();
        }
        let (kind, winner, loser) = self.step()?;
        block.kind = kind;
        block.count = 1;
        block.split = false;
        block.matrix.try_add_column(winner, loser, limit);
        loop {
            match self.peek() {
                Ok(k) if k == kind => {}
                // A tie surfaces on the next call.
                _ => break,
            }
            let (alpha, beta) = (self.perm.top()[d - 1], self.perm.bottom()[d - 1]);
            let (w, l) = match kind {
                StepKind::Top => (alpha, beta),
                StepKind::Bottom => (beta, alpha),
            };
            if !block.matrix.try_add_column(w, l, limit) {
                block.split = true;
                return Ok(());
            }
            self.step()?;
            block.count += 1;
        }
        self.blocks += 1;
        Ok(())
    }
}

/// One Rauzy-Veech step, renormalized to unit length.
pub fn rauzy_step(iet: &Iet) -> Result<(Iet, InductionStep)> {
    let mut ind = Inducer::new(iet);
    let (kind, winner, loser) = ind.step()?;
    let mut matrix = IntMatrix::identity(iet.d());
    matrix.set(winner, loser, 1);
    let step = InductionStep {
        kind,
        winner,
        loser,
        matrix,
        new_perm: ind.perm().clone(),
    };
    Ok((ind.to_iet(), step))
}

/// One Zorich step: all consecutive Rauzy steps of the same kind.
pub fn zorich_step(iet: &Iet) -> Result<(Iet, ZorichBlock)> {
    let mut ind = Inducer::new(iet);
    let mut block = ZorichBlock::identity(iet.d());
    ind.next_block(&mut block)?;
    Ok((ind.to_iet(), block))
}

/// The action of a block on the cohomology lattice: the transpose of the
/// length matrix, i.e. the inverse-transpose of the map taking old lengths
/// to new ones.
pub fn cocycle_on_cohomology(block: &ZorichBlock) -> IntMatrix {
    block.matrix.transpose()
}

/// Inverse of a block's length matrix, i.e. the map from old to new lengths.
/// Exact; the block matrices are unimodular.
pub fn length_matrix_inverse(block: &ZorichBlock, perm_before: &Permutation) -> IntMatrix {
    // Undo the steps one at a time: (E_1⋯E_n)^{-1} = E_n^{-1}⋯E_1^{-1} with
    // E^{-1} = I - e_{w,l}. The step sequence is replayed from the
    // permutation, which determines winner/loser given the kind.
    let d = perm_before.d();
    let mut perm = perm_before.clone();
    let mut inv = IntMatrix::identity(d);
    for _ in 0..block.count {
        let (w, l) = apply_move(&mut perm, block.kind);
        // inv <- E^{-1} inv: row w -= row l
        for c in 0..d {
            let v = inv.get(w, c) - inv.get(l, c);
            inv.set(w, c, v);
        }
    }
    inv
}

/// Float-mode kind sequence for up to `steps` Rauzy steps, stopping early
/// at a tie (reported in the second component).
pub fn float_induction_prefix(iet: &Iet, steps: usize) -> (Vec<StepKind>, Option<Error>) {
    inducer_prefix(Inducer::new(iet), steps)
}

/// Float-mode kind sequence started from an [`Inducer`].
pub fn inducer_prefix(mut ind: Inducer, steps: usize) -> (Vec<StepKind>, Option<Error>) {
    let mut kinds = Vec::with_capacity(steps);
    for _ in 0..steps {
        match ind.step() {
            Ok((k, _, _)) => kinds.push(k),
            Err(e) => return (kinds, Some(e)),
        }
    }
    (kinds, None)
}

/// An exchange with exact rational lengths (never renormalized).
#[derive(Debug, Clone, PartialEq)]
pub struct RationalIet {
    pub perm: Permutation,
    pub lengths: Vec<BigRational>,
}

impl RationalIet {
    pub fn new(perm: Permutation, lengths: Vec<BigRational>) -> Result<Self> {
        if lengths.len() != perm.d() {
            return Err(Error::InvalidInput("length count differs from d".into()));
        }
        if lengths.iter().any(|l| !l.is_positive()) {
            return Err(Error::InvalidInput("lengths must be positive".into()));
        }
        Ok(RationalIet { perm, lengths })
    }

    /// Lengths `numerators[k] / denominator`.
    pub fn from_ratios(perm: Permutation, numerators: &[i64], denominator: i64) -> Result<Self> {
        let den = BigInt::from(denominator);
        let lengths = numerators
            .iter()
            .map(|&n| BigRational::new(BigInt::from(n), den.clone()))
            .collect();
        Self::new(perm, lengths)
    }

    /// Float induction state with each length rounded to the nearest
    /// double and [`Scaling::Dyadic`]; exact for dyadic lengths with a
    /// common denominator of at most `2^53`.
    pub fn float_inducer(&self) -> Result<Inducer> {
        use num_traits::ToPrimitive;
        let lengths: Vec<f64> = self
            .lengths
            .iter()
            .map(|l| l.to_f64().unwrap_or(f64::NAN))
            .collect();
        Inducer::from_lengths(self.perm.clone(), &lengths, Scaling::Dyadic)
    }

    /// Nearest float exchange.
    pub fn to_float(&self) -> Result<Iet> {
        use num_traits::ToPrimitive;
        let lengths: Vec<f64> = self
            .lengths
            .iter()
            .map(|l| l.to_f64().unwrap_or(f64::NAN))
            .collect();
        Iet::new(self.perm.clone(), &lengths)
    }

    /// One exact step; `lengths_before = matrix · lengths_after` holds exactly.
    pub fn step(&mut self, step_index: u64) -> Result<InductionStep> {
        let d = self.perm.d();
        let a = &self.lengths[self.perm.top()[d - 1]];
        let b = &self.lengths[self.perm.bottom()[d - 1]];
        let kind = match a.cmp(b) {
            std::cmp::Ordering::Greater => StepKind::Top,
            std::cmp::Ordering::Less => StepKind::Bottom,
            std::cmp::Ordering::Equal => return Err(Error::Tie { step: step_index }),
        };
        let (winner, loser) = apply_move(&mut self.perm, kind);
        let l = self.lengths[loser].clone();
        self.lengths[winner] -= l;
        debug_assert!(!self.lengths[winner].is_zero());
        let mut matrix = IntMatrix::identity(d);
        matrix.set(winner, loser, 1);
        Ok(InductionStep {
            kind,
            winner,
            loser,
            matrix,
            new_perm: self.perm.clone(),
        })
    }
}

/// Exact Top/Bottom decisions for `steps` Rauzy steps.
pub fn exact_induction_path(iet: &RationalIet, steps: usize) -> Result<Vec<StepKind>> {
    match exact_induction_prefix(iet, steps) {
        (kinds, None) => Ok(kinds),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`exact_induction_path`] but returns the decisions made before a
/// tie as well.
pub fn exact_induction_prefix(iet: &RationalIet, steps: usize) -> (Vec<StepKind>, Option<Error>) {
    let mut state = iet.clone();
    let mut kinds = Vec::with_capacity(steps);
    for i in 0..steps {
        match state.step(i as u64) {
            Ok(s) => kinds.push(s.kind),
            Err(e) => return (kinds, Some(e)),
        }
    }
    (kinds, None)
}

/// Outcome of comparing two decision sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathComparison {
    /// Length of the common prefix.
    pub agreed: usize,
    /// Index of the first differing decision, if both paths reach it.
    pub first_divergence: Option<usize>,
}

pub fn compare_paths(a: &[StepKind], b: &[StepKind]) -> PathComparison {
    let agreed = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let first_divergence = (agreed < a.len().min(b.len())).then_some(agreed);
    PathComparison {
        agreed,
        first_divergence,
    }
}

/// One row of an induction trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: u64,
    pub kind: StepKind,
    pub count: u64,
    pub scale_log: f64,
}

/// Runs `blocks` Zorich steps and records the trace.
pub fn induction_trace(iet: &Iet, blocks: usize) -> Result<Vec<TraceRow>> {
    let mut ind = Inducer::new(iet);
    let mut block = ZorichBlock::identity(iet.d());
    let mut rows = Vec::with_capacity(blocks);
    for i in 0..blocks {
        ind.next_block(&mut block)?;
        rows.push(TraceRow {
            step: i as u64,
            kind: block.kind,
            count: block.count,
            scale_log: ind.scale_log(),
        });
    }
    Ok(rows)
}

/// CSV with header `step,kind,count,scale_log`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("step,kind,count,scale_log\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:e}\n", r.step, r.kind, r.count, r.scale_log));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_iet(d: usize, seed: u64) -> Iet {
        let lengths = crate::rng::uniform_simplex(&mut crate::rng::rng_from_seed(seed), d);
        Iet::new(Permutation::rotation_class(d).unwrap(), &lengths).unwrap()
    }

    fn swap(a: f64, b: f64) -> Iet {
        Iet::new(Permutation::rotation_class(2).unwrap(), &[a, b]).unwrap()
    }

    #[test]
    fn continued_fraction_step() {
        let (next, step) = rauzy_step(&swap(0.7, 0.3)).unwrap();
        assert_eq!(step.kind, StepKind::Bottom);
        assert!((next.lengths()[0] - 4.0 / 7.0).abs() < 1e-15);
        assert!((next.lengths()[1] - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(step.matrix, IntMatrix::from_rows(&[vec![1, 1], vec![0, 1]]));
        // E · (0.4, 0.3) = (0.7, 0.3)
        let shrink = (next.scale_log() - swap(0.7, 0.3).scale_log()).exp();
        let after: Vec<f64> = next.lengths().iter().map(|l| l * shrink).collect();
        assert!((after[0] + after[1] - 0.7).abs() < 1e-15);
        assert!((after[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn golden_d4_step_is_top() {
        let iet = Iet::new(Permutation::rotation_class(4).unwrap(), &[0.2, 0.3, 0.1, 0.4]).unwrap();
        let (next, step) = rauzy_step(&iet).unwrap();
        assert_eq!(step.kind, StepKind::Top);
        assert_eq!((step.winner, step.loser), (3, 0));
        // β = 1 moves right after α = 4 in the bottom row
        assert_eq!(next.perm().bottom_one_based(), vec![4, 1, 3, 2]);
        assert_eq!(next.perm().top_one_based(), vec![1, 2, 3, 4]);
        let expect = [0.2, 0.3, 0.1, 0.2].map(|x: f64| x / 0.8);
        for (a, b) in next.lengths().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zorich_block_counts_partial_quotient() {
        let (_, block) = zorich_step(&swap(0.7, 0.3)).unwrap();
        assert_eq!(block.count, 2);
        assert_eq!(block.kind, StepKind::Bottom);
        assert_eq!(block.matrix, IntMatrix::from_rows(&[vec![1, 2], vec![0, 1]]));
    }

    #[test]
    fn golden_mean_blocks_have_count_one() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut iet = swap(phi - 1.0, 2.0 - phi);
        for _ in 0..25 {
            let (next, block) = zorich_step(&iet).unwrap();
            assert_eq!(block.count, 1);
            iet = next;
        }
    }

    #[test]
    fn block_matrix_is_product_of_steps() {
        let iet = random_iet(5, 21);
        let mut cur = iet.clone();
        for _ in 0..20 {
            let (next, block) = zorich_step(&cur).unwrap();
            let mut prod = IntMatrix::identity(5);
            let mut s = cur.clone();
            for _ in 0..block.count {
                let (n2, st) = rauzy_step(&s).unwrap();
                assert_eq!(st.kind, block.kind);
                prod = prod.checked_mul(&st.matrix).unwrap();
                s = n2;
            }
            assert_eq!(prod, block.matrix);
            assert_eq!(s.perm(), next.perm());
            cur = next;
        }
    }

    #[test]
    fn tie_aborts() {
        assert_eq!(rauzy_step(&swap(0.5, 0.5)).unwrap_err(), Error::Tie { step: 0 });
        let exact = RationalIet::from_ratios(Permutation::rotation_class(2).unwrap(), &[1, 1], 2).unwrap();
        assert_eq!(exact_induction_path(&exact, 3), Err(Error::Tie { step: 0 }));
    }

    #[test]
    fn exact_path_of_seven_thirds() {
        // 7/3 = [2; 3]: two Bottom steps, then (1,3) gives two Top steps and a tie.
        let exact = RationalIet::from_ratios(Permutation::rotation_class(2).unwrap(), &[7, 3], 10).unwrap();
        let (kinds, stop) = exact_induction_prefix(&exact, 10);
        use StepKind::*;
        assert_eq!(kinds, vec![Bottom, Bottom, Top, Top]);
        assert_eq!(stop, Some(Error::Tie { step: 4 }));
    }

    #[test]
    fn exact_relation_holds() {
        let mut exact = RationalIet::from_ratios(
            Permutation::rotation_class(4).unwrap(),
            &[123457, 234571, 345713, 296259],
            1_000_000,
        )
        .unwrap();
        for i in 0..30 {
            let before = exact.lengths.clone();
            let Ok(step) = exact.step(i) else { break };
            for (r, b) in before.iter().enumerate() {
                let mut acc = BigRational::zero();
                for (c, a) in exact.lengths.iter().enumerate() {
                    acc += a * BigRational::from_integer(step.matrix.get(r, c).into());
                }
                assert_eq!(&acc, b);
            }
        }
    }

    #[test]
    fn length_inverse_is_inverse() {
        let iet = random_iet(4, 22);
        let mut cur = iet;
        for _ in 0..30 {
            let (next, block) = zorich_step(&cur).unwrap();
            let inv = length_matrix_inverse(&block, cur.perm());
            assert_eq!(block.matrix.checked_mul(&inv).unwrap(), IntMatrix::identity(4));
            cur = next;
        }
    }

    #[test]
    fn compare_paths_reports_divergence() {
        use StepKind::*;
        let c = compare_paths(&[Top, Top, Bottom], &[Top, Top, Top, Bottom]);
        assert_eq!(c.agreed, 2);
        assert_eq!(c.first_divergence, Some(2));
        let c = compare_paths(&[Top], &[Top, Bottom]);
        assert_eq!(c.first_divergence, None);
    }

    #[test]
    fn trace_has_header_and_rows() {
        // ratio 1 + √2: every partial quotient is 2
        let rows = induction_trace(&swap(1.0 + 2f64.sqrt(), 1.0), 3).unwrap();
        let csv = trace_csv(&rows);
        assert!(csv.starts_with("step,kind,count,scale_log\n"));
        assert_eq!(csv.lines().count(), 4);
        assert!(rows.iter().all(|r| r.count == 2));
    }
}

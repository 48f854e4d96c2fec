//! Small dense matrices used by the cocycle code.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Row-major square integer matrix.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntMatrix {
    n: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0; n * n];
        for i in 0..n {
            data[i * n + i] = 1;
        }
        IntMatrix { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        IntMatrix {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        IntMatrix {
            n,
            data: rows.concat(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.n + j] = v;
    }

    pub fn set_identity(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0);
        for i in 0..self.n {
            self.data[i * self.n + i] = 1;
        }
    }

    pub fn transpose(&self) -> IntMatrix {
        let n = self.n;
        let mut t = IntMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    /// Exact product in `i128`; `None` if an entry leaves the `i64` range.
    pub fn checked_mul(&self, rhs: &IntMatrix) -> Option<IntMatrix> {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = IntMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc: i128 = 0;
                for k in 0..n {
                    acc += self.get(i, k) as i128 * rhs.get(k, j) as i128;
                }
                out.data[i * n + j] = i64::try_from(acc).ok()?;
            }
        }
        Some(out)
    }

    pub fn max_abs(&self) -> i64 {
        self.data.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    /// `column[dst] += column[src]`, refusing if an entry would exceed `limit`.
    #[inline]
    pub(crate) fn try_add_column(&mut self, src: usize, dst: usize, limit: i64) -> bool {
        let n = self.n;
        for i in 0..n {
            let s = self.data[i * n + src] as i128 + self.data[i * n + dst] as i128;
            if s > limit as i128 {
                return false;
            }
        }
        for i in 0..n {
            self.data[i * n + dst] += self.data[i * n + src];
        }
        true
    }

    /// Determinant by fraction-free (Bareiss) elimination, exact.
    pub fn determinant(&self) -> i128 {
        let n = self.n;
        let mut a: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) as i128).collect())
            .collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if a[k][k] == 0 {
                match (k + 1..n).find(|&r| a[r][k] != 0) {
                    Some(r) => {
                        a.swap(k, r);
                        sign = -sign;
                    }
                    None => return 0,
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
                }
            }
            prev = a[k][k];
        }
        sign * a[n - 1][n - 1]
    }

    /// Rank over the rationals, via fraction-free elimination.
    pub fn rank(&self) -> usize {
        let n = self.n;
        let mut a: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) as i128).collect())
            .collect();
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..n).find(|&r| a[r][col] != 0) else {
                continue;
            };
            a.swap(rank, p);
            for r in 0..n {
                if r != rank && a[r][col] != 0 {
                    let (f, g) = (a[r][col], a[rank][col]);
                    for c in 0..n {
                        a[r][c] = a[r][c] * g - a[rank][c] * f;
                    }
                    let gcd = a[r].iter().fold(0i128, |acc, &x| gcd(acc, x.abs()));
                    if gcd > 1 {
                        a[r].iter_mut().for_each(|x| *x /= gcd);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as f64).collect())
            .collect()
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[i64]> = self.data.chunks(self.n).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// A set of `k` column vectors in `R^n`, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Frame {
    /// The first `k` standard basis vectors.
    pub fn standard(n: usize, k: usize) -> Self {
        let mut data = vec![0.0; n * k];
        for j in 0..k.min(n) {
            data[j * n + j] = 1.0;
        }
        Frame { n, k, data }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let k = cols.len();
        let n = cols.first().map_or(0, |c| c.len());
        Frame {
            n,
            k,
            data: cols.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    /// Replaces every column `v` by `Mᵀ v`.
    pub fn apply_transpose(&mut self, m: &IntMatrix, scratch: &mut Vec<f64>) {
        let n = self.n;
        scratch.resize(n, 0.0);
        for j in 0..self.k {
            let col = &mut self.data[j * n..(j + 1) * n];
            for (i, out) in scratch.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (r, c) in col.iter().enumerate() {
                    acc += m.get(r, i) as f64 * c;
                }
                *out = acc;
            }
            col.copy_from_slice(scratch);
        }
    }

    /// Replaces every column `v` by `M v`.
    pub fn apply(&mut self, m: &IntMatrix, scratch: &mut Vec<f64>) {
        let n = self.n;
        scratch.resize(n, 0.0);
        for j in 0..self.k {
            let col = &mut self.data[j * n..(j + 1) * n];
            for (i, out) in scratch.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (c, x) in col.iter().enumerate() {
                    acc += m.get(i, c) as f64 * x;
                }
                *out = acc;
            }
            col.copy_from_slice(scratch);
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Modified Gram-Schmidt in column order, with one re-orthogonalization
    /// pass. Column order is never permuted: the flag `span(v_1..v_i)` is what
    /// the exponent bookkeeping relies on. Writes `ln R_ii` into `log_diag`.
    pub fn orthonormalize(&mut self, log_diag: &mut [f64]) {
        let n = self.n;
        for j in 0..self.k {
            let mut log_norm = 0.0;
            for _pass in 0..2 {
                let (head, tail) = self.data.split_at_mut(j * n);
                let vj = &mut tail[..n];
                for i in 0..j {
                    let qi = &head[i * n..(i + 1) * n];
                    let dot: f64 = qi.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
                    vj.iter_mut().zip(qi).for_each(|(v, q)| *v -= dot * q);
                }
                let norm = vj.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    vj.iter_mut().for_each(|x| *x /= norm);
                }
                log_norm += norm.ln();
            }
            log_diag[j] = log_norm;
        }
    }

    /// Dot products `⟨column_j, v⟩`.
    pub fn pair(&self, v: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|j| self.column(j).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_column_slice(self.n, self.k, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Frame {
            n: m.nrows(),
            k: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }
}

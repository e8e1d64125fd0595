//! Compressed sparse row storage for the assembled systems.

use std::io::{self, Write};

use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use nalgebra::DMatrix;

/// Marks a local degree of freedom that is not part of the global system.
pub const SKIP: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Square pattern coupling every pair of global indices that appear in a
    /// common element. Entries equal to [`SKIP`] are ignored.
    pub fn from_elements<'a>(n: usize, elements: impl Iterator<Item = &'a [usize]> + Clone) -> Self {
        let mut count = vec![0usize; n + 1];
        for el in elements.clone() {
            for &i in el.iter().filter(|&&i| i != SKIP) {
                count[i + 1] += 1;
            }
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut incidence = vec![0usize; count[n]];
        let mut fill = count.clone();
        let els: Vec<&[usize]> = elements.collect();
        for (e, el) in els.iter().enumerate() {
            for &i in el.iter().filter(|&&i| i != SKIP) {
                incidence[fill[i]] = e;
                fill[i] += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut scratch = Vec::new();
        for i in 0..n {
            scratch.clear();
            for &e in &incidence[count[i]..count[i + 1]] {
                scratch.extend(els[e].iter().copied().filter(|&j| j != SKIP));
            }
            scratch.sort_unstable();
            scratch.dedup();
            col_idx.extend_from_slice(&scratch);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n_rows: n, n_cols: n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut m = Self::zeros(n_rows, n_cols);
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *m.values.last_mut().expect("entry") += v;
                continue;
            }
            m.col_idx.push(c);
            m.values.push(v);
            m.row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n_rows {
            m.row_ptr[i + 1] += m.row_ptr[i];
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].binary_search(&j).ok().map(|k| a + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds a local block; both index lists may contain [`SKIP`].
    ///
    /// Panics if an entry falls outside the sparsity pattern.
    pub fn add_local(&mut self, rows: &[usize], cols: &[usize], local: &DMatrix<f64>) {
        for (a, &i) in rows.iter().enumerate() {
            if i == SKIP {
                continue;
            }
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let row = &self.col_idx[start..end];
            for (b, &j) in cols.iter().enumerate() {
                if j == SKIP {
                    continue;
                }
                let k = row.binary_search(&j).unwrap_or_else(|_| panic!("({i}, {j}) outside the pattern"));
                self.values[start + k] += local[(a, b)];
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| {
                let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
                self.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&j, v)| v * x[j]).sum()
            })
            .collect()
    }

    /// Residual `b - A x` with every row accumulated in compensated
    /// double-double arithmetic.
    pub fn residual_compensated(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        self.residual_extended(None, x, None, b, None)
    }

    /// Residual `(b + b_tail) - (A + A_tail)(x + x_tail)` for operands carried
    /// as unevaluated sums, accumulated as in [`Self::residual_compensated`].
    /// `a_tail` shares the pattern of `self`; the product of the two tails is
    /// below the working precision and dropped.
    pub fn residual_extended(
        &self,
        a_tail: Option<&[f64]>,
        x: &[f64],
        x_tail: Option<&[f64]>,
        b: &[f64],
        b_tail: Option<&[f64]>,
    ) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| {
                let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
                let mut acc = DoubleDouble::from(b[i]);
                if let Some(bt) = b_tail {
                    acc = acc.add(bt[i]);
                }
                for k in s..e {
                    let (j, v) = (self.col_idx[k], self.values[k]);
                    acc = acc.add_product(-v, x[j]);
                    if let Some(t) = x_tail {
                        acc = acc.add_product(-v, t[j]);
                    }
                    if let Some(at) = a_tail {
                        acc = acc.add_product(-at[k], x[j]);
                    }
                }
                acc.value()
            })
            .collect()
    }

    /// Adds a local block given as `hi + lo` into `self.values + tail`,
    /// keeping the running sums in double-double.
    pub fn add_local_extended(&mut self, tail: &mut [f64], rows: &[usize], hi: &DMatrix<f64>, lo: &DMatrix<f64>) {
        for (a, &i) in rows.iter().enumerate() {
            if i == SKIP {
                continue;
            }
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for (b, &j) in rows.iter().enumerate() {
                if j == SKIP {
                    continue;
                }
                let k = start
                    + self.col_idx[start..end]
                        .binary_search(&j)
                        .unwrap_or_else(|_| panic!("({i}, {j}) outside the pattern"));
                let (s, e) = two_sum(self.values[k], hi[(a, b)]);
                self.values[k] = s;
                tail[k] += e + lo[(a, b)];
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over the stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[(i, self.col_idx[k])] += self.values[k];
            }
        }
        d
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Self {
        let mut trips = Vec::new();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                if d[(i, j)] != 0.0 {
                    trips.push((i, j, d[(i, j)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &trips)
    }

    /// Symmetric permutation `P A Pᵀ` where row `i` of the result is row
    /// `perm[i]` of `self`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mut trips = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                trips.push((inv[i], inv[self.col_idx[k]], self.values[k]));
            }
        }
        Self::from_triplets(self.n_rows, self.n_cols, &trips)
    }

    /// Column-compressed copy. For a symmetric matrix the CSR arrays already
    /// describe its transpose, so no reordering is needed.
    pub fn to_faer_symmetric(&self) -> SparseColMat<usize, f64> {
        let symbolic = SymbolicSparseColMat::new_checked(
            self.n_cols,
            self.n_rows,
            self.row_ptr.clone(),
            None,
            self.col_idx.clone(),
        );
        SparseColMat::new(symbolic, self.values.clone())
    }

    /// Writes one `row col value` line per stored entry (zero based).
    pub fn write_coo(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "% {} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(out, "{} {} {:.17e}", i, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }
}

/// Unevaluated sum `hi + lo` carrying roughly twice the working precision.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }
}

pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl DoubleDouble {
    /// `self + a * b` with the product and the sum kept exact up to the
    /// final renormalization.
    pub fn add_product(self, a: f64, b: f64) -> Self {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let (s, e) = two_sum(self.hi, p);
        let lo = e + pe + self.lo;
        let (hi, lo) = two_sum(s, lo);
        Self { hi, lo }
    }

    pub fn add(self, v: f64) -> Self {
        let (s, e) = two_sum(self.hi, v);
        let (hi, lo) = two_sum(s, e + self.lo);
        Self { hi, lo }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Dot product with compensated accumulation.
pub fn dot_compensated(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(DoubleDouble::default(), |acc, (x, y)| acc.add_product(*x, *y)).value()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

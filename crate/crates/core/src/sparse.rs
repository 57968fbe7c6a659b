//! Compressed sparse row storage for complex matrices.
//!
//! Entries are kept in row-major order with strictly increasing column
//! indices inside each row, so two matrices assembled from the same triplets
//! in any order have identical storage and identical floating point results.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(diag.len(), diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Duplicate coordinates are summed; exact zeros are dropped.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < rows && c < cols, "triplet ({r},{c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let m = Self { rows, cols, indptr, indices, values };
        m.pruned()
    }

    fn pruned(self) -> Self {
        if self.values.iter().all(|v| *v != ZERO) {
            return self;
        }
        let rows = self.rows;
        let cols = self.cols;
        Self::from_sorted_iter(rows, cols, self.iter().filter(|t| t.2 != ZERO))
    }

    fn from_sorted_iter<I: Iterator<Item = (usize, usize, C64)>>(rows: usize, cols: usize, it: I) -> Self {
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (r, c, v) in it {
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self { rows, cols, indptr, indices, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Iterates `(row, col, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let slice = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match slice.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => ZERO,
        }
    }

    /// `out += alpha * self * x`
    pub fn mul_vec_acc(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.rows];
        self.mul_vec_acc(C64::new(1.0, 0.0), x, &mut out);
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v = v.conj());
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m.pruned()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add");
        Self::from_triplets(self.rows, self.cols, self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Sum of several equally shaped matrices.
    pub fn sum<'a, I: IntoIterator<Item = &'a CsrMatrix>>(rows: usize, cols: usize, mats: I) -> Self {
        Self::from_triplets(rows, cols, mats.into_iter().flat_map(|m| {
            assert_eq!(m.shape(), (rows, cols));
            m.iter()
        }))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut trip = Vec::new();
        let mut acc = vec![ZERO; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.cols];
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = ZERO;
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.rows, other.cols, trip)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                trip.push((r1 * other.rows + r2, c1 * other.cols + c2, v1 * v2));
            }
        }
        Self::from_triplets(rows, cols, trip)
    }

    /// Sub-matrix selecting `rows` and `cols` (both given as index lists into
    /// this matrix). Entries outside the selection are dropped.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.cols];
        for (j, &c) in cols.iter().enumerate() {
            col_map[c] = j;
        }
        let mut trip = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = col_map[c];
                if j != usize::MAX {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), trip)
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut d = vec![vec![ZERO; self.cols]; self.rows];
        for (r, c, v) in self.iter() {
            d[r][c] = v;
        }
        d
    }

    pub fn from_dense(d: &[Vec<C64>]) -> Self {
        let rows = d.len();
        let cols = d.first().map_or(0, |r| r.len());
        Self::from_triplets(
            rows,
            cols,
            d.iter().enumerate().flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (r, c, v))),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).iter().map(|t| t.2.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// True when column `c` holds at least one nonzero.
    pub fn nonzero_columns(&self) -> Vec<bool> {
        let mut out = vec![false; self.cols];
        for &c in &self.indices {
            out[c] = true;
        }
        out
    }

    pub fn diagonal_values(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn triplets_sum_and_sort() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(1, 0, c(1.0)), (0, 1, c(2.0)), (1, 0, c(3.0)), (0, 0, c(0.0))]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), c(4.0));
        assert_eq!(m.get(0, 0), c(0.0));
    }

    #[test]
    fn kron_matches_dense() {
        let a = CsrMatrix::from_dense(&[vec![c(1.0), c(2.0)], vec![c(0.0), c(3.0)]]);
        let b = CsrMatrix::from_dense(&[vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]]);
        let k = a.kron(&b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k.get(0, 1), c(1.0));
        assert_eq!(k.get(1, 2), c(2.0));
        assert_eq!(k.get(3, 2), c(3.0));
        assert_eq!(k.nnz(), 6);
    }

    #[test]
    fn matmul_and_identity() {
        let a = CsrMatrix::from_dense(&[vec![c(1.0), C64::new(0.0, 1.0)], vec![c(2.0), c(0.0)]]);
        let i = CsrMatrix::identity(2);
        assert_eq!(a.matmul(&i), a);
        let aa = a.matmul(&a);
        assert_eq!(aa.get(0, 0), c(1.0) + C64::new(0.0, 2.0));
        assert_eq!(aa.get(1, 1), C64::new(0.0, 2.0));
    }

    #[test]
    fn restrict_selects_block() {
        let a = CsrMatrix::from_dense(&[
            vec![c(1.0), c(2.0), c(3.0)],
            vec![c(4.0), c(5.0), c(6.0)],
            vec![c(7.0), c(8.0), c(9.0)],
        ]);
        let r = a.restrict(&[0, 2], &[1, 2]);
        assert_eq!(r.to_dense(), vec![vec![c(2.0), c(3.0)], vec![c(8.0), c(9.0)]]);
    }
}

//! Compressed-row sparse complex operators.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseOperator {
    pub fn zero(dim: usize) -> Self {
        SparseOperator {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SparseOperator::from_diagonal(&vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        SparseOperator::from_triplets(
            diag.len(),
            diag.iter().enumerate().map(|(i, v)| (i, i, *v)),
        )
    }

    /// Builds from `(row, col, value)` entries. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets<I>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut t: Vec<(usize, usize, Complex64)> = entries.into_iter().collect();
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != ZERO);
        let mut row_ptr = vec![0usize; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            dim,
            row_ptr,
            cols: merged.iter().map(|e| e.1).collect(),
            values: merged.iter().map(|e| e.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.values[k]))
        })
    }

    /// Entries of one row as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => ZERO,
        }
    }

    /// `out = A·x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim];
        self.apply(x, &mut out);
        out
    }

    /// `⟨x|A|x⟩` without allocating.
    pub fn expectation(&self, x: &[Complex64]) -> Complex64 {
        let mut acc = ZERO;
        for r in 0..self.dim {
            let mut row = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * x[self.cols[k]];
            }
            acc += x[r].conj() * row;
        }
        acc
    }

    pub fn adjoint(&self) -> Self {
        SparseOperator::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        SparseOperator::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn add(&self, other: &SparseOperator) -> Self {
        assert_eq!(self.dim, other.dim);
        SparseOperator::from_triplets(self.dim, self.triplets().chain(other.triplets()))
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &SparseOperator) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut entries = Vec::new();
        for (r, k, a) in self.triplets() {
            for (c, b) in other.row(k) {
                entries.push((r, c, a * b));
            }
        }
        SparseOperator::from_triplets(self.dim, entries)
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn off_diagonal(&self) -> Self {
        SparseOperator::from_triplets(self.dim, self.triplets().filter(|e| e.0 != e.1))
    }

    /// Exact entry-wise Hermiticity.
    pub fn is_hermitian(&self) -> bool {
        self.triplets().all(|(r, c, v)| self.get(c, r) == v.conj())
    }

    /// Largest entry magnitude of `self − other`.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
            .triplets()
            .map(|e| e.2.norm())
            .fold(0.0, f64::max)
    }

    /// Rows and columns restricted to `keep` (ascending), renumbered.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        SparseOperator::from_triplets(
            keep.len(),
            self.triplets()
                .filter(|e| map[e.0] != usize::MAX && map[e.1] != usize::MAX)
                .map(|(r, c, v)| (map[r], map[c], v)),
        )
    }

    /// Dense row-major copy; intended for small dimensions only.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim * self.dim];
        for (r, c, v) in self.triplets() {
            out[r * self.dim + c] = v;
        }
        out
    }
}

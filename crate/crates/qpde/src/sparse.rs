//! Compressed-row sparse matrices over real or complex entries.
//!
//! Every generator in the crate (finite-difference stencils, the affine
//! generator `A`, the homogeneous generator `S`, its Hermitian parts and the
//! Schrödinger Hamiltonian `H`) is stored as a [`SparseOperator`].

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Scalar field usable as a sparse-matrix entry.
pub trait Entry:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + nalgebra::Scalar
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Modulus of the entry.
    fn modulus(self) -> f64;
    /// Complex conjugate (identity for reals).
    fn conjugate(self) -> Self;
    fn from_real(x: f64) -> Self;
}

impl Entry for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conjugate(self) -> Self {
        self
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl Entry for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conjugate(self) -> Self {
        self.conj()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// Sparse matrix in compressed-row form.
///
/// Invariants: within each row the column indices are strictly increasing and
/// lie in `[0, cols)`; no stored entry is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T: Entry = f64> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

/// Complex-valued sparse operator (Hermitian parts, Hamiltonians).
pub type ComplexOperator = SparseOperator<Complex64>;

impl<T: Entry> SparseOperator<T> {
    /// Builds an operator from `(row, col, value)` triplets; duplicates are summed
    /// and entries that sum to exactly zero are dropped.
    ///
    /// # Panics
    /// Panics if a triplet lies outside the `rows × cols` shape.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut row_of = Vec::with_capacity(triplets.len());
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut v) = triplets[i];
            let mut j = i + 1;
            while j < triplets.len() && triplets[j].0 == r && triplets[j].1 == c {
                v += triplets[j].2;
                j += 1;
            }
            if v != T::zero() {
                col_idx.push(c);
                values.push(v);
                row_of.push(r);
            }
            i = j;
        }
        for &r in &row_of {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// The all-zero `rows × cols` operator.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, Vec::new())
    }

    /// The `n × n` identity.
    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    /// Square diagonal operator.
    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self::from_triplets(n, n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    /// Dense conversion (tests and small oracles only).
    pub fn from_dense(m: &DMatrix<T>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                t.push((i, j, m[(i, j)]));
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn dim_rows(&self) -> usize {
        self.rows
    }

    pub fn dim_cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Maximum number of stored entries in any row (the sparsity 𝔰).
    pub fn sparsity(&self) -> usize {
        (0..self.rows)
            .map(|r| self.row_ptr[r + 1] - self.row_ptr[r])
            .max()
            .unwrap_or(0)
    }

    /// Iterator over `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    /// All stored entries as triplets in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    /// Largest entry modulus ‖·‖_max.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum ‖·‖_∞ (an upper bound on the spectral radius).
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `y = self · x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = self · x`, writing into a caller-provided buffer. Rows are processed in
    /// parallel; each row is a fixed-order sum so the result is independent of the
    /// worker count.
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        assert_eq!(y.len(), self.rows, "matvec output dimension mismatch");
        let kernel = |(r, out): (usize, &mut T)| {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        };
        if self.nnz() > 1 << 15 {
            y.par_iter_mut().enumerate().for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
    }

    /// Transpose (no conjugation).
    pub fn transpose(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, t)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let t = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v.conjugate()))
            .collect();
        Self::from_triplets(self.cols, self.rows, t)
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let mut t = self.triplets();
        t.extend(other.triplets());
        Self::from_triplets(self.rows, self.cols, t)
    }

    /// Entrywise `self − other`.
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// `alpha · self`.
    pub fn scale(&self, alpha: T) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (r, c, alpha * v)).collect();
        Self::from_triplets(self.rows, self.cols, t)
    }

    /// `diag(d) · self`.
    pub fn scale_rows(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.rows, "row scaling dimension mismatch");
        let t = self.triplets().into_iter().map(|(r, c, v)| (r, c, d[r] * v)).collect();
        Self::from_triplets(self.rows, self.cols, t)
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "product dimension mismatch");
        let mut t = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.rows, other.cols, t)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                t.push((r1 * other.rows + r2, c1 * other.cols + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.rows * other.rows, self.cols * other.cols, t)
    }

    /// Principal-block embedding: places `self` in the top-left corner of an
    /// `rows × cols` zero operator.
    pub fn embed(&self, rows: usize, cols: usize) -> Self {
        assert!(rows >= self.rows && cols >= self.cols, "embedding shrinks the operator");
        Self::from_triplets(rows, cols, self.triplets())
    }

    /// True when `self == self†` entrywise (exact comparison).
    pub fn is_hermitian(&self) -> bool {
        self.rows == self.cols
            && self
                .triplets()
                .iter()
                .all(|&(r, c, v)| self.get(c, r).conjugate() == v)
    }

    /// Dense copy.
    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::from_element(self.rows, self.cols, T::zero());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }
}

impl SparseOperator<f64> {
    /// Promotes a real operator to complex entries.
    pub fn to_complex(&self) -> ComplexOperator {
        let t = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, Complex64::new(v, 0.0)))
            .collect();
        SparseOperator::from_triplets(self.rows, self.cols, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let op = SparseOperator::from_triplets(
            2,
            3,
            vec![(0, 2, 1.0), (0, 0, 2.0), (0, 2, -1.0), (1, 1, 3.0), (1, 1, 1.0)],
        );
        assert_eq!(op.nnz(), 2);
        assert_eq!(op.get(0, 0), 2.0);
        assert_eq!(op.get(0, 2), 0.0);
        assert_eq!(op.get(1, 1), 4.0);
        assert_eq!(op.sparsity(), 1);
    }

    #[test]
    fn matvec_matches_dense() {
        let op = SparseOperator::from_triplets(3, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (2, 1, -3.0)]);
        let x = [1.0, 2.0, 3.0];
        let y = op.matvec(&x);
        let yd = op.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert_eq!(y[i], yd[i]);
        }
    }

    #[test]
    fn kron_with_identity_counts() {
        let a = SparseOperator::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        let k = a.kron(&SparseOperator::identity(3));
        assert_eq!(k.nnz(), 6);
        assert_eq!(k.get(0, 3), 1.0);
        assert_eq!(k.get(5, 2), 1.0);
    }

    #[test]
    fn adjoint_and_hermitian_check() {
        let i = Complex64::new(0.0, 1.0);
        let h = SparseOperator::from_triplets(2, 2, vec![(0, 1, i), (1, 0, -i), (0, 0, Complex64::new(2.0, 0.0))]);
        assert!(h.is_hermitian());
        let nh = SparseOperator::from_triplets(2, 2, vec![(0, 1, i), (1, 0, i)]);
        assert!(!nh.is_hermitian());
        assert_eq!(nh.adjoint().get(1, 0), -i);
    }
}

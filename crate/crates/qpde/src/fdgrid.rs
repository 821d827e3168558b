//! Uniform closed grids, central finite-difference stencils and their
//! Kronecker lifting onto tensor-product grids.
//!
//! Conventions used throughout the crate:
//!
//! * an [`Axis`] has `N = 2^n` points including both interval endpoints, so
//!   `Δ = (upper − lower)/(N − 1)`;
//! * a [`TensorGrid`] orders its nodes lexicographically with the **last axis
//!   fastest**;
//! * stencil builders leave boundary rows empty — boundary closures are the
//!   business of [`crate::pde_models`].

use crate::error::{Error, Result};
pub use crate::sparse::{ComplexOperator, Entry, SparseOperator};

/// One uniform axis of a tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    /// Number of nodes, a power of two.
    pub points: usize,
    /// Closed-grid spacing `(upper − lower)/(points − 1)`.
    pub spacing: f64,
}

impl Axis {
    /// Number of qubits needed to index the axis.
    pub fn qubits(&self) -> u32 {
        self.points.trailing_zeros()
    }

    /// Coordinate of node `k`; the last node lands exactly on `upper`.
    pub fn coord(&self, k: usize) -> f64 {
        self.lower + (self.upper - self.lower) * k as f64 / (self.points - 1) as f64
    }

    /// All node coordinates.
    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.coord(k)).collect()
    }
}

/// Builds an axis with `2^n_qubits` points on the closed interval `[lower, upper]`.
pub fn build_axis(label: &str, lower: f64, upper: f64, n_qubits: u32) -> Result<Axis> {
    if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
        return Err(Error::invalid(format!(
            "axis `{label}` needs upper > lower, got [{lower}, {upper}]"
        )));
    }
    if n_qubits == 0 || n_qubits > 30 {
        return Err(Error::invalid(format!(
            "axis `{label}` needs 1 <= n_qubits <= 30, got {n_qubits}"
        )));
    }
    let points = 1usize << n_qubits;
    Ok(Axis {
        label: label.to_string(),
        lower,
        upper,
        points,
        spacing: (upper - lower) / (points - 1) as f64,
    })
}

/// Cartesian product of axes with lexicographic (last axis fastest) flat indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    pub axes: Vec<Axis>,
    strides: Vec<usize>,
    volume: usize,
}

impl TensorGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("a tensor grid needs at least one axis"));
        }
        let mut strides = vec![1usize; axes.len()];
        for j in (0..axes.len() - 1).rev() {
            strides[j] = strides[j + 1] * axes[j + 1].points;
        }
        let volume = strides[0] * axes[0].points;
        Ok(Self {
            axes,
            strides,
            volume,
        })
    }

    /// Product of the point counts.
    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    /// Total number of qubits of the grid register.
    pub fn qubits(&self) -> u32 {
        self.axes.iter().map(Axis::qubits).sum()
    }

    /// Flat-index stride of each axis.
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Multi-index → flat index.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.axes.len());
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Flat index → multi-index.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.axes)
            .map(|(s, a)| (flat / s) % a.points)
            .collect()
    }

    /// Coordinates of the node with the given flat index.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.coord(k))
            .collect()
    }

    /// Samples a scalar field at every node, in flat order.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.volume).map(|i| f(&self.coords(i))).collect()
    }
}

fn require_points(axis: &Axis, min: usize) -> Result<()> {
    if axis.points < min {
        return Err(Error::invalid(format!(
            "axis `{}` has {} points, stencil needs at least {min}",
            axis.label, axis.points
        )));
    }
    Ok(())
}

fn tridiagonal(axis: &Axis, w: [f64; 3]) -> SparseOperator {
    let n = axis.points;
    let mut t = Vec::with_capacity(3 * n);
    for k in 1..n - 1 {
        t.push((k, k - 1, w[0]));
        t.push((k, k, w[1]));
        t.push((k, k + 1, w[2]));
    }
    SparseOperator::from_triplets(n, n, t)
}

/// Central first derivative `(V_{k+1} − V_{k−1})/(2Δ)` on interior rows.
pub fn d1_central(axis: &Axis) -> Result<SparseOperator> {
    require_points(axis, 3)?;
    let h = 0.5 / axis.spacing;
    Ok(tridiagonal(axis, [-h, 0.0, h]))
}

/// Central second derivative `(V_{k+1} − 2V_k + V_{k−1})/Δ²` on interior rows.
pub fn d2_central(axis: &Axis) -> Result<SparseOperator> {
    require_points(axis, 3)?;
    let h = 1.0 / (axis.spacing * axis.spacing);
    Ok(tridiagonal(axis, [h, -2.0 * h, h]))
}

/// Four-point mixed derivative ∂²/∂x_i∂x_j on rows interior to both axes.
pub fn mixed_central(grid: &TensorGrid, axis_i: usize, axis_j: usize) -> Result<SparseOperator> {
    if axis_i == axis_j {
        return Err(Error::invalid("mixed stencil needs two distinct axes"));
    }
    let (ai, aj) = match (grid.axes.get(axis_i), grid.axes.get(axis_j)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("mixed stencil axis index out of range")),
    };
    require_points(ai, 3)?;
    require_points(aj, 3)?;
    let w = 1.0 / (4.0 * ai.spacing * aj.spacing);
    let (si, sj) = (grid.strides()[axis_i], grid.strides()[axis_j]);
    let mut t = Vec::new();
    for flat in 0..grid.volume() {
        let m = grid.multi_index(flat);
        let (ki, kj) = (m[axis_i], m[axis_j]);
        if ki == 0 || kj == 0 || ki + 1 == ai.points || kj + 1 == aj.points {
            continue;
        }
        t.push((flat, flat + si + sj, w));
        t.push((flat, flat + si - sj, -w));
        t.push((flat, flat - si + sj, -w));
        t.push((flat, flat - si - sj, w));
    }
    Ok(SparseOperator::from_triplets(grid.volume(), grid.volume(), t))
}

/// Lifts a 1D operator acting on axis `axis_index` to the full grid
/// (`I ⊗ … ⊗ op ⊗ … ⊗ I`).
pub fn lift_to_grid(op: &SparseOperator, grid: &TensorGrid, axis_index: usize) -> Result<SparseOperator> {
    let axis = grid
        .axes
        .get(axis_index)
        .ok_or_else(|| Error::invalid("lift axis index out of range"))?;
    if op.dim_rows() != axis.points || op.dim_cols() != axis.points {
        return Err(Error::invalid(format!(
            "operator of size {}x{} cannot act on axis `{}` with {} points",
            op.dim_rows(),
            op.dim_cols(),
            axis.label,
            axis.points
        )));
    }
    let before: usize = grid.axes[..axis_index].iter().map(|a| a.points).product();
    let after: usize = grid.axes[axis_index + 1..].iter().map(|a| a.points).product();
    Ok(SparseOperator::identity(before)
        .kron(op)
        .kron(&SparseOperator::identity(after)))
}

/// Diagonal operator holding `f` evaluated at every grid node.
pub fn diag_sample(grid: &TensorGrid, f: impl Fn(&[f64]) -> f64) -> SparseOperator {
    SparseOperator::from_diagonal(&grid.sample(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid2(n: u32) -> TensorGrid {
        TensorGrid::new(vec![
            build_axis("x", 0.0, 3.0, n).unwrap(),
            build_axis("y", -1.0, 2.0, n).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn axis_examples() {
        let a = build_axis("S", 0.0, 120.0, 6).unwrap();
        assert_eq!(a.points, 64);
        assert_eq!(a.spacing, 120.0 / 63.0);
        let b = build_axis("x", 0.0, 1.0, 1).unwrap();
        assert_eq!((b.points, b.spacing), (2, 1.0));
        let v = build_axis("v", 0.0, 0.45, 3).unwrap();
        assert_relative_eq!(v.spacing * 7.0, 0.45, max_relative = 1e-15);
        assert!(build_axis("z", 1.0, 1.0, 2).is_err());
        assert!(build_axis("z", 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn flat_index_round_trip_last_axis_fastest() {
        let g = TensorGrid::new(vec![
            build_axis("a", 0.0, 1.0, 1).unwrap(),
            build_axis("b", 0.0, 1.0, 2).unwrap(),
            build_axis("c", 0.0, 1.0, 3).unwrap(),
        ])
        .unwrap();
        assert_eq!(g.volume(), 64);
        assert_eq!(g.flat_index(&[0, 0, 1]), 1);
        assert_eq!(g.flat_index(&[0, 1, 0]), 8);
        assert_eq!(g.flat_index(&[1, 0, 0]), 32);
        for i in 0..g.volume() {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
        }
    }

    #[test]
    fn d1_exact_on_quadratics_and_weights() {
        let a = build_axis("x", -1.0, 2.0, 4).unwrap();
        let x = a.coords();
        let lin: Vec<f64> = x.iter().map(|x| 3.0 * x + 2.0).collect();
        let quad: Vec<f64> = x.iter().map(|x| x * x).collect();
        let d = d1_central(&a).unwrap();
        let (dl, dq) = (d.matvec(&lin), d.matvec(&quad));
        for k in 1..a.points - 1 {
            assert_relative_eq!(dl[k], 3.0, max_relative = 1e-12);
            assert_relative_eq!(dq[k], 2.0 * x[k], epsilon = 1e-12);
        }
        assert_eq!(dl[0], 0.0);
        let wide = build_axis("x", 0.0, 6.0, 2).unwrap();
        let dw = d1_central(&wide).unwrap();
        assert_eq!((dw.get(1, 0), dw.get(1, 1), dw.get(1, 2)), (-0.25, 0.0, 0.25));
    }

    #[test]
    fn d2_exact_on_cubics_and_weights() {
        let a = build_axis("x", -1.0, 2.0, 4).unwrap();
        let x = a.coords();
        let cubic: Vec<f64> = x.iter().map(|x| x * x * x - x * x).collect();
        let d = d2_central(&a).unwrap();
        let y = d.matvec(&cubic);
        for k in 1..a.points - 1 {
            assert_relative_eq!(y[k], 6.0 * x[k] - 2.0, epsilon = 1e-10);
        }
        let c = d.matvec(&vec![5.0; a.points]);
        assert!(c.iter().all(|v| v.abs() < 1e-12));
        let half = build_axis("x", 0.0, 1.5, 2).unwrap();
        let dh = d2_central(&half).unwrap();
        assert_eq!((dh.get(1, 0), dh.get(1, 1), dh.get(1, 2)), (4.0, -8.0, 4.0));
    }

    #[test]
    fn d2_converges_at_second_order() {
        let err = |n: u32| {
            let a = build_axis("x", 0.0, 3.0, n).unwrap();
            let f: Vec<f64> = a.coords().iter().map(|x| x.sin()).collect();
            let y = d2_central(&a).unwrap().matvec(&f);
            (1..a.points - 1)
                .map(|k| (y[k] + a.coord(k).sin()).abs())
                .fold(0.0, f64::max)
        };
        for n in 4..8 {
            let ratio = err(n) / err(n + 1);
            assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio} at n = {n}");
        }
    }

    #[test]
    fn mixed_stencil_exactness() {
        let g = grid2(3);
        let m = mixed_central(&g, 0, 1).unwrap();
        let xy = g.sample(|c| c[0] * c[1]);
        let x2 = g.sample(|c| c[0] * c[0]);
        let x2y2 = g.sample(|c| c[0] * c[0] * c[1] * c[1]);
        let (a, b, c) = (m.matvec(&xy), m.matvec(&x2), m.matvec(&x2y2));
        for flat in 0..g.volume() {
            let k = g.multi_index(flat);
            if k.iter().any(|&k| k == 0 || k == 7) {
                assert_eq!(a[flat], 0.0);
                continue;
            }
            let p = g.coords(flat);
            assert_relative_eq!(a[flat], 1.0, max_relative = 1e-12);
            assert!(b[flat].abs() < 1e-12);
            assert_relative_eq!(c[flat], 4.0 * p[0] * p[1], epsilon = 1e-11);
        }
        assert!(mixed_central(&g, 1, 1).is_err());
        assert_eq!(m.sparsity(), 4);
    }

    #[test]
    fn lifting_identity_and_d2() {
        let g = grid2(2);
        let id = lift_to_grid(&SparseOperator::identity(4), &g, 1).unwrap();
        assert_eq!(id, SparseOperator::identity(16));
        let d2 = lift_to_grid(&d2_central(&g.axes[0]).unwrap(), &g, 0).unwrap();
        let f = g.sample(|c| c[0] * c[0]);
        let y = d2.matvec(&f);
        for flat in 0..16 {
            let k = g.multi_index(flat)[0];
            let expect = if k == 0 || k == 3 { 0.0 } else { 2.0 };
            assert_relative_eq!(y[flat], expect, epsilon = 1e-12);
        }
        // (interior rows of the 1D stencil) · 3 · (points of the other axis)
        assert_eq!(d2.nnz(), 2 * 3 * 4);
        assert_eq!(d2.to_dense().iter().filter(|v| **v != 0.0).count(), 24);
        assert!(lift_to_grid(&SparseOperator::identity(3), &g, 0).is_err());
    }

    #[test]
    fn lifting_commutes_across_axes() {
        let g = grid2(2);
        let a = lift_to_grid(&d2_central(&g.axes[0]).unwrap(), &g, 0).unwrap();
        let b = lift_to_grid(&d1_central(&g.axes[1]).unwrap(), &g, 1).unwrap();
        assert_eq!(a.mul(&b), b.mul(&a));
    }

    #[test]
    fn diag_sample_examples() {
        let a = build_axis("S", 0.0, 120.0, 6).unwrap();
        let g = TensorGrid::new(vec![a]).unwrap();
        let d = diag_sample(&g, |c| c[0]);
        for k in 1..64 {
            assert_eq!(d.get(k, k), k as f64 * 120.0 / 63.0);
        }
        let g1 = grid2(2);
        assert_eq!(diag_sample(&g1, |_| 1.0), SparseOperator::identity(16));
        let sv = diag_sample(&g1, |c| c[0] * c[1].abs().sqrt());
        let sx = g1.sample(|c| c[0]);
        let sy = g1.sample(|c| c[1].abs().sqrt());
        for i in 0..16 {
            assert_eq!(sv.get(i, i), sx[i] * sy[i]);
        }
    }
}

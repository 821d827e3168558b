//! Dense and sparse linear-algebra kernels: the matrix exponential, its action
//! on vectors (Taylor for real generators, Lanczos for Hermitian ones), banded
//! LU and BiCGSTAB.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::{ComplexOperator, SparseOperator};

/// Dense matrix exponential by scaling and squaring with a [13/13] Padé approximant.
pub fn expm<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> DMatrix<T> {
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].modulus()).sum::<f64>())
        .fold(0.0, f64::max);
    let theta13 = 5.371_920_351_148_152;
    let s = if norm1 > theta13 { (norm1 / theta13).log2().ceil() as i32 } else { 0 };
    let scale = T::from_real(2f64.powi(-s));
    let a = a * scale;
    let c = |k: usize| T::from_real(B[k]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9));
    let u = &a * (u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &id * c(1));
    let v_inner = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8));
    let v = v_inner + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &id * c(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `e^{t M} x` for a real sparse `M` by a substepped truncated Taylor series.
///
/// Substeps are chosen so that `‖t M‖_∞ / steps ≤ 1`; each substep sums terms
/// until the next term falls below `tol` relative to the iterate.
pub fn taylor_expm_action(m: &SparseOperator, t: f64, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    let norm = m.inf_norm() * t.abs();
    let steps = norm.ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut y = x.to_vec();
    let mut term = vec![0.0; y.len()];
    let mut next = vec![0.0; y.len()];
    for _ in 0..steps {
        term.copy_from_slice(&y);
        let mut acc = y.clone();
        let mut converged = false;
        for k in 1..=80 {
            m.matvec_into(&term, &mut next);
            let f = dt / k as f64;
            for (tv, nv) in term.iter_mut().zip(&next) {
                *tv = nv * f;
            }
            let tn = term.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (a, tv) in acc.iter_mut().zip(&term) {
                *a += tv;
            }
            let an = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
            if tn <= tol * an.max(f64::MIN_POSITIVE) || tn == 0.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numerical("Taylor exponential action did not converge"));
        }
        y = acc;
    }
    Ok(y)
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `e^{−i H t} ψ` for Hermitian `H` by restarted Lanczos with adaptive substeps.
///
/// Each substep builds an `m`-dimensional Krylov basis (full
/// reorthogonalisation), exponentiates the tridiagonal projection exactly and
/// accepts the step when the standard a-posteriori estimate
/// `β_m |[e^{−iT_m dt} e_1]_m|` is below `tol·dt/t`. Rejected steps are halved.
pub fn lanczos_expm_action(h: &ComplexOperator, t: f64, psi: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let n = psi.len();
    if t == 0.0 || n == 0 {
        return Ok(psi.to_vec());
    }
    let m_max = 40.min(n);
    let total = t.abs();
    let sign = t.signum();
    let hnorm = h.inf_norm();
    let mut dt = if hnorm == 0.0 { total } else { (10.0 / hnorm).min(total) };
    let mut done = 0.0;
    let mut y = psi.to_vec();
    let mut guard = 0usize;
    while done < total * (1.0 - 1e-15) {
        guard += 1;
        if guard > 1_000_000 {
            return Err(Error::numerical("Lanczos propagation exceeded the step budget"));
        }
        dt = dt.min(total - done);
        let beta0 = cnorm(&y);
        if beta0 == 0.0 {
            return Ok(y);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![y.iter().map(|z| z / beta0).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        let mut happy = false;
        for j in 0..m_max {
            h.matvec_into(&basis[j], &mut w);
            let a = cdot(&basis[j], &w).re;
            alpha.push(a);
            for q in &basis {
                let c = cdot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
            let b = cnorm(&w);
            beta.push(b);
            if b <= 1e-14 * hnorm.max(1.0) {
                happy = true;
                break;
            }
            if j + 1 < m_max {
                basis.push(w.iter().map(|z| z / b).collect());
            }
        }
        let m = alpha.len();
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            tri[(j, j)] = alpha[j];
            if j + 1 < m {
                tri[(j, j + 1)] = beta[j];
                tri[(j + 1, j)] = beta[j];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let coeff = |tau: f64| -> DVector<Complex64> {
            let mut c = DVector::<Complex64>::zeros(m);
            for k in 0..m {
                let phase = Complex64::new(0.0, -sign * eig.eigenvalues[k] * tau).exp();
                let v0 = eig.eigenvectors[(0, k)];
                for r in 0..m {
                    c[r] += eig.eigenvectors[(r, k)] * v0 * phase;
                }
            }
            c
        };
        let (c, err) = loop {
            let c = coeff(dt);
            let err = if happy { 0.0 } else { beta[m - 1] * c[m - 1].norm() * beta0 };
            if err > tol * (dt / total) * beta0.max(1.0) && dt > total * 1e-12 {
                dt *= 0.5;
                continue;
            }
            break (c, err);
        };
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        for (k, q) in basis.iter().take(m).enumerate() {
            let ck = c[k] * beta0;
            for (yi, qi) in next.iter_mut().zip(q) {
                *yi += ck * qi;
            }
        }
        y = next;
        done += dt;
        if err < 0.1 * tol * (dt / total) * beta0.max(1.0) {
            dt *= 1.5;
        }
    }
    Ok(y)
}

/// LU factorisation of a banded matrix with partial pivoting (LAPACK `gbtrf` layout).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage with `2kl + ku + 1` entries per row.
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    /// Factorises a square sparse matrix; errors on exact singularity.
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let n = a.dim_rows();
        let (mut kl, mut ku) = (0usize, 0usize);
        for (r, c, _) in a.triplets() {
            if c < r {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * width];
        // Entry (i, j) lives at ab[i*width + (j + kl - i)] once shifted by kl for fill-in.
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        for (r, c, v) in a.triplets() {
            ab[idx(r, c)] = v;
        }
        let mut piv = vec![0usize; n];
        let ku_eff = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = ab[idx(k, k)].abs();
            for i in k + 1..=last {
                let v = ab[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::numerical("singular banded matrix"));
            }
            piv[k] = p;
            let jmax = (k + ku_eff).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    ab.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = ab[idx(k, k)];
            for i in k + 1..=last {
                let f = ab[idx(i, k)] / pivot;
                ab[idx(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..=jmax {
                        ab[idx(i, j)] -= f * ab[idx(k, j)];
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, ab, piv })
    }

    /// Number of stored band entries.
    pub fn storage(&self) -> usize {
        self.ab.len()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.n, self.kl);
        let width = 2 * kl + self.ku + 1;
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let ku_eff = kl + self.ku;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                x[i] -= self.ab[idx(i, k)] * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ku_eff).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= self.ab[idx(k, j)] * x[j];
            }
            x[k] = s / self.ab[idx(k, k)];
        }
        x
    }
}

/// Predicted band storage for a matrix, used to choose between direct and
/// iterative solves.
pub fn band_storage(a: &SparseOperator) -> usize {
    let (mut kl, mut ku) = (0usize, 0usize);
    for (r, c, _) in a.triplets() {
        if c < r {
            kl = kl.max(r - c);
        } else {
            ku = ku.max(c - r);
        }
    }
    a.dim_rows() * (2 * kl + ku + 1)
}

/// Jacobi-preconditioned BiCGSTAB to a relative residual `tol`.
pub fn bicgstab(a: &SparseOperator, rhs: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = rhs.len();
    let diag: Vec<f64> = a.diagonal().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let bnorm = dot(rhs, rhs).sqrt().max(f64::MIN_POSITIVE);
    let mut x = x0.to_vec();
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
    if dot(&r, &r).sqrt() <= tol * bnorm {
        return Ok(x);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let phat: Vec<f64> = p.iter().zip(&diag).map(|(a, d)| a * d).collect();
        v = a.matvec(&phat);
        alpha = rho_new / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if dot(&s, &s).sqrt() <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(x);
        }
        let shat: Vec<f64> = s.iter().zip(&diag).map(|(a, d)| a * d).collect();
        let t = a.matvec(&shat);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok(x);
        }
        rho = rho_new;
    }
    Err(Error::numerical("BiCGSTAB did not reach the requested residual"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pseudo_random(n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed;
        DMatrix::from_fn(n, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let e = expm(&d);
        assert_relative_eq!(e[(0, 0)], 1f64.exp(), max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], (-2f64).exp(), max_relative = 1e-14);
        let n = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let e = expm(&n);
        // I + N + N²/2 with N² = [[0,0,3],[0,0,0],[0,0,0]]
        assert_relative_eq!(e[(0, 2)], 2.0 + 1.5, max_relative = 1e-14);
        assert_relative_eq!(e[(0, 1)], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn expm_large_norm_inverse_property() {
        let a = pseudo_random(6, 3) * 20.0;
        let p = expm(&a) * expm(&(-&a));
        for i in 0..6 {
            for j in 0..6 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - target).abs() < 1e-6, "{}", p[(i, j)]);
            }
        }
    }

    #[test]
    fn taylor_action_matches_dense() {
        let a = pseudo_random(12, 7) * 8.0;
        let sp = SparseOperator::from_dense(&a);
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let y = taylor_expm_action(&sp, -0.7, &x, 1e-14).unwrap();
        let yd = expm(&(&a * -0.7)) * DVector::from_vec(x);
        for i in 0..12 {
            assert_relative_eq!(y[i], yd[i], epsilon = 1e-10 * yd.norm());
        }
    }

    #[test]
    fn lanczos_matches_dense_hermitian() {
        let a = pseudo_random(24, 11);
        let b = pseudo_random(24, 12);
        let hd = DMatrix::from_fn(24, 24, |i, j| {
            Complex64::new(a[(i, j)] + a[(j, i)], b[(i, j)] - b[(j, i)]) * 5.0
        });
        let h = SparseOperator::from_dense(&hd);
        let psi: Vec<Complex64> = (0..24).map(|i| Complex64::new((i as f64).cos(), 0.3)).collect();
        let y = lanczos_expm_action(&h, 1.3, &psi, 1e-11).unwrap();
        let yd = expm(&(&hd * Complex64::new(0.0, -1.3))) * DVector::from_vec(psi.clone());
        for i in 0..24 {
            assert!((y[i] - yd[i]).norm() < 1e-9, "{} vs {}", y[i], yd[i]);
        }
        let back = lanczos_expm_action(&h, -1.3, &y, 1e-11).unwrap();
        for i in 0..24 {
            assert!((back[i] - psi[i]).norm() < 2e-9);
        }
    }

    #[test]
    fn banded_lu_solves_with_pivoting() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, if i % 3 == 0 { 1e-3 } else { 4.0 }));
            if i + 1 < n {
                t.push((i, i + 1, 2.0));
                t.push((i + 1, i, -3.0));
            }
            if i + 3 < n {
                t.push((i, i + 3, 0.5));
            }
        }
        let a = SparseOperator::from_triplets(n, n, t);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
        let b = a.matvec(&x);
        let lu = BandedLu::factor(&a).unwrap();
        let y = lu.solve(&b);
        for i in 0..n {
            assert_relative_eq!(y[i], x[i], epsilon = 1e-11);
        }
        let it = bicgstab(&a.add(&SparseOperator::identity(n).scale(10.0)), &b, &vec![0.0; n], 1e-12, 500).unwrap();
        let r = a.add(&SparseOperator::identity(n).scale(10.0)).matvec(&it);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-9);
        }
    }
}

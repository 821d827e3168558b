//! Schrödingerisation: the homogeneous generator `S` is split into Hermitian
//! parts, the auxiliary `ξ` variable is discretised on a periodic grid, the
//! warped initial state `Φ₀(ξ) ⊗ w(T)` is evolved unitarily and the solution is
//! recovered by postselecting on `ξ` beyond the junk-penetration threshold.
//!
//! Register layout is `ξ`-major: amplitude `m·dim + j` belongs to `ξ`/`η`
//! index `m` and system component `j`. The `η` register uses the FFT ordering
//! `(0, Δη, …, b−Δη, a, …, −Δη)` produced by the discrete Fourier transform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::lanczos_expm_action;
use crate::numerics::nelder_mead;
use crate::sparse::{ComplexOperator, SparseOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Periodic grid for the auxiliary variable and its Fourier dual.
#[derive(Debug, Clone, PartialEq)]
pub struct XiGrid {
    /// Half-width `L`; the grid covers `[−L, L)`.
    pub half_width: f64,
    /// Number of points `N_ξ = 2^{n_ξ}`.
    pub points: usize,
    /// Spacing `Δξ = 2L/N_ξ`.
    pub spacing: f64,
    /// Frequencies `η` in FFT order.
    pub eta_diag: Vec<f64>,
}

impl XiGrid {
    /// Builds the grid with `2^n_qubits` points on `[−L, L)`.
    pub fn new(half_width: f64, n_qubits: u32) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!("ξ half-width must be positive, got {half_width}")));
        }
        if !(2..=24).contains(&n_qubits) {
            return Err(Error::invalid(format!("ξ register needs 2..=24 qubits, got {n_qubits}")));
        }
        let points = 1usize << n_qubits;
        let spacing = 2.0 * half_width / points as f64;
        let d_eta = std::f64::consts::PI / half_width;
        let eta_diag = (0..points)
            .map(|m| if m < points / 2 { m as f64 * d_eta } else { (m as f64 - points as f64) * d_eta })
            .collect();
        Ok(Self {
            half_width,
            points,
            spacing,
            eta_diag,
        })
    }

    pub fn qubits(&self) -> u32 {
        self.points.trailing_zeros()
    }

    /// `ξ_k = −L + kΔξ`.
    pub fn xi(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.xi(k)).collect()
    }

    /// Frequency spacing `Δη = π/L`.
    pub fn delta_eta(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// First retained index `N_ξ/2 + ⌈λτ/Δξ⌉` of the postselection window.
    pub fn threshold_index(&self, lambda_tau: f64) -> usize {
        let shift = (lambda_tau.max(0.0) / self.spacing - 1e-9).ceil().max(0.0) as usize;
        (self.points / 2 + shift).min(self.points)
    }
}

/// Smooth cut-off profile `Φ₀(ξ) = ζ(ξ) e^{−ξ}` sampled on the `ξ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProfile {
    pub eps_schr: f64,
    /// `ξ_k` sample locations.
    pub xi: Vec<f64>,
    /// `Φ₀(ξ_k)`.
    pub samples: Vec<f64>,
    /// Normaliser `C_ζ` fixing `ζ(+∞) = 1`.
    pub normalizer: f64,
}

impl CutoffProfile {
    /// `ζ(ξ) = C_ζ·½(1 + erf(g(ξ)))` with `g(ξ) = (2ξ + 1)·√ln(1/ε)`.
    pub fn zeta(eps_schr: f64, xi: f64) -> f64 {
        let g = (2.0 * xi + 1.0) * (1.0 / eps_schr).ln().sqrt();
        0.5 * erfc(-g)
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Builds `Φ₀` on the grid and checks the periodic-tail condition.
pub fn build_cutoff(eps_schr: f64, xi: &XiGrid) -> Result<CutoffProfile> {
    if !(eps_schr > 0.0 && eps_schr < 0.5) {
        return Err(Error::invalid(format!("eps_schr must lie in (0, 0.5), got {eps_schr}")));
    }
    let xs = xi.xis();
    let samples: Vec<f64> = xs.iter().map(|&x| CutoffProfile::zeta(eps_schr, x) * (-x).exp()).collect();
    let max = samples.iter().cloned().fold(0.0, f64::max);
    let left = samples[0];
    let right = CutoffProfile::zeta(eps_schr, xi.half_width) * (-xi.half_width).exp();
    if left > 1e-6 * max || right > 1e-6 * max {
        return Err(Error::invalid(format!(
            "ξ half-width {} is too small for eps_schr = {eps_schr}: tail values {left:.3e}, {right:.3e} exceed 1e-6·max",
            xi.half_width
        )));
    }
    if !samples.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical("cut-off profile is not finite on the grid"));
    }
    Ok(CutoffProfile {
        eps_schr,
        xi: xs,
        samples,
        normalizer: 1.0,
    })
}

fn legendre_rows(t: f64, q: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if q >= 1 {
        out[1] = t;
    }
    for k in 2..=q {
        out[k] = ((2 * k - 1) as f64 * t * out[k - 1] - (k - 1) as f64 * out[k - 2]) / k as f64;
    }
}

fn piecewise_fidelity(xi: &[f64], f: &[f64], support: &[bool], breaks: &[f64], q: usize) -> f64 {
    let mut fit = vec![0.0; f.len()];
    let g = breaks.len() - 1;
    for p in 0..g {
        let (lo, hi) = (breaks[p], breaks[p + 1]);
        let idx: Vec<usize> = (0..xi.len())
            .filter(|&k| support[k] && xi[k] >= lo && (xi[k] < hi || (p == g - 1 && xi[k] <= hi)))
            .collect();
        if idx.is_empty() {
            continue;
        }
        let deg = q.min(idx.len() - 1);
        let mut v = DMatrix::<f64>::zeros(idx.len(), deg + 1);
        let mut row = vec![0.0; deg + 1];
        for (r, &k) in idx.iter().enumerate() {
            let t = if hi > lo { 2.0 * (xi[k] - lo) / (hi - lo) - 1.0 } else { 0.0 };
            legendre_rows(t, deg, &mut row);
            for c in 0..=deg {
                v[(r, c)] = row[c];
            }
        }
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&k| f[k]));
        let Ok(coef) = v.clone().svd(true, true).solve(&rhs, 1e-14) else {
            return 0.0;
        };
        let vals = v * coef;
        for (r, &k) in idx.iter().enumerate() {
            fit[k] = vals[r];
        }
    }
    let dot: f64 = fit.iter().zip(f).map(|(a, b)| a * b).sum();
    let nf: f64 = fit.iter().map(|a| a * a).sum();
    let ng: f64 = f.iter().map(|a| a * a).sum();
    if nf == 0.0 {
        0.0
    } else {
        dot * dot / (nf * ng)
    }
}

/// Fidelity of the best `G`-piece, degree-`Q` polynomial approximation of `Φ₀`.
///
/// The fit is restricted to the support `Φ₀ ≥ 10⁻⁶·max Φ₀` (outside it the
/// approximant is zero) and each piece is fitted by least squares in a Legendre
/// basis. For `G > 1` the interior breakpoints are optimised by a simplex
/// search from several deterministic starts. Returns the squared normalised
/// overlap `⟨fit, Φ₀⟩² / (‖fit‖²‖Φ₀‖²)`.
pub fn cutoff_poly_fit(profile: &CutoffProfile, pieces: usize, max_degree: usize) -> Result<f64> {
    if pieces == 0 {
        return Err(Error::invalid("need at least one polynomial piece"));
    }
    let max = profile.samples.iter().cloned().fold(0.0, f64::max);
    let support: Vec<bool> = profile.samples.iter().map(|&v| v >= 1e-6 * max).collect();
    let count = support.iter().filter(|&&s| s).count();
    if (max_degree + 1) * pieces > count {
        return Err(Error::invalid(format!(
            "{pieces} pieces of degree {max_degree} need more than the {count} support samples"
        )));
    }
    let xs = &profile.xi;
    let a = (0..xs.len()).filter(|&k| support[k]).map(|k| xs[k]).fold(f64::INFINITY, f64::min);
    let b = (0..xs.len()).filter(|&k| support[k]).map(|k| xs[k]).fold(f64::NEG_INFINITY, f64::max);
    let fid = |inner: &[f64]| -> f64 {
        let mut br = Vec::with_capacity(pieces + 1);
        br.push(a);
        let mut sorted = inner.to_vec();
        sorted.sort_by(f64::total_cmp);
        br.extend(sorted.iter().map(|v| v.clamp(a, b)));
        br.push(b);
        piecewise_fidelity(xs, &profile.samples, &support, &br, max_degree)
    };
    if pieces == 1 {
        return Ok(fid(&[]));
    }
    let g = pieces - 1;
    let width = b - a;
    // Equal spacing, clustering near the kink of the profile (around ξ = −½),
    // and a geometric spread towards the decaying right tail.
    let equal: Vec<f64> = (1..=g).map(|i| a + width * i as f64 / pieces as f64).collect();
    let clustered: Vec<f64> = (1..=g).map(|i| -1.5 + 3.0 * i as f64 / pieces as f64).collect();
    let geometric: Vec<f64> = (1..=g).map(|i| -1.0 + (2f64).powi(i as i32) - 1.0).collect();
    let mut best = fid(&equal);
    for start in [equal, clustered, geometric] {
        let step = vec![0.1 * width / pieces as f64; g];
        let m = nelder_mead(|x| -fid(x), &start, &step, 1e-12, 2000);
        best = best.max(-m.value);
    }
    Ok(best)
}

/// Split `S = S1 + i S2` into Hermitian parts `S1 = (S + Sᵀ)/2`, `S2 = (S − Sᵀ)/(2i)`.
pub fn hermitian_split(s: &SparseOperator) -> (SparseOperator, ComplexOperator) {
    let st = s.transpose();
    let s1 = s.add(&st).scale(0.5);
    let anti = s.sub(&st);
    let s2 = ComplexOperator::from_triplets(
        s.dim_rows(),
        s.dim_cols(),
        anti.triplets().into_iter().map(|(r, c, v)| (r, c, Complex64::new(0.0, -0.5 * v))).collect(),
    );
    (s1, s2)
}

/// Gershgorin upper bound on `λ = max(0, −λ_min(S1))`.
pub fn lambda_bound(s1: &SparseOperator) -> f64 {
    (0..s1.dim_rows())
        .map(|r| {
            let (mut diag, mut off) = (0.0, 0.0);
            for (c, v) in s1.row(r) {
                if c == r {
                    diag = v;
                } else {
                    off += v.abs();
                }
            }
            -(diag - off)
        })
        .fold(0.0, f64::max)
}

/// Gershgorin upper bound on the largest eigenvalue of `S1`.
pub fn upper_spectral_bound(s1: &SparseOperator) -> f64 {
    (0..s1.dim_rows())
        .map(|r| s1.row(r).map(|(c, v)| if c == r { v } else { v.abs() }).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exact `max(0, −λ_min(S1))` by dense eigensolve (dimension ≤ 4096).
pub fn lambda_exact(s1: &SparseOperator) -> Result<f64> {
    if s1.dim_rows() > 4096 {
        return Err(Error::Unsupported(format!(
            "exact λ needs a dense eigensolve; dimension {} exceeds 4096",
            s1.dim_rows()
        )));
    }
    let eig = SymmetricEigen::new(s1.to_dense());
    Ok(eig.eigenvalues.iter().cloned().fold(0.0, |acc: f64, v| acc.max(-v)))
}

/// Schrödingerised system `H = −X_η ⊗ S1 + I ⊗ S2`.
#[derive(Debug, Clone)]
pub struct SchrodingerSystem {
    pub hamiltonian: ComplexOperator,
    pub xi: XiGrid,
    /// Dimension of the system register.
    pub system_dim: usize,
    pub lambda_bound: f64,
}

impl SchrodingerSystem {
    /// `(n_ξ, ⌈log2 dim(S)⌉)`.
    pub fn layout(&self) -> (u32, u32) {
        (self.xi.qubits(), usize::BITS - (self.system_dim.max(2) - 1).leading_zeros())
    }
}

/// Assembles the full Hamiltonian on the `ξ ⊗ system` register.
pub fn assemble_hamiltonian(s1: &SparseOperator, s2: &ComplexOperator, xi: &XiGrid) -> Result<SchrodingerSystem> {
    let dim = s1.dim_rows();
    if s1.dim_cols() != dim || s2.dim_rows() != dim || s2.dim_cols() != dim {
        return Err(Error::invalid("S1 and S2 must be square with equal dimensions"));
    }
    let t1 = s1.triplets();
    let t2 = s2.triplets();
    let mut t = Vec::with_capacity(xi.points * (t1.len() + t2.len()));
    for (m, &eta) in xi.eta_diag.iter().enumerate() {
        let off = m * dim;
        t.extend(t1.iter().map(|&(r, c, v)| (off + r, off + c, Complex64::new(-eta * v, 0.0))));
        t.extend(t2.iter().map(|&(r, c, v)| (off + r, off + c, v)));
    }
    let n = xi.points * dim;
    Ok(SchrodingerSystem {
        hamiltonian: ComplexOperator::from_triplets(n, n, t),
        xi: xi.clone(),
        system_dim: dim,
        lambda_bound: lambda_bound(s1),
    })
}

/// Unit-norm amplitudes on the `ξ ⊗ system` register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    pub xi_points: usize,
    pub system_dim: usize,
    /// Normalisation `𝒩_ψ` removed when the state was prepared.
    pub norm: f64,
}

impl StateVector {
    pub fn l2_norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Unitary DFT along the `ξ` register of a `ξ`-major array, in place.
///
/// Forward uses `e^{−2πikm/N}/√N`, which maps `ξ` samples to `η` amplitudes.
pub fn xi_transform(data: &mut [Complex64], xi_points: usize, system_dim: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(xi_points)
    } else {
        planner.plan_fft_forward(xi_points)
    };
    let scale = 1.0 / (xi_points as f64).sqrt();
    let mut column = vec![ZERO; xi_points];
    for j in 0..system_dim {
        for m in 0..xi_points {
            column[m] = data[m * system_dim + j];
        }
        fft.process(&mut column);
        for m in 0..xi_points {
            data[m * system_dim + j] = column[m] * scale;
        }
    }
}

/// `ψ(T) = (DFT Φ₀) ⊗ w(T) / (‖Φ₀‖‖w(T)‖)`.
pub fn initial_state(profile: &CutoffProfile, w_t: &[f64]) -> Result<StateVector> {
    let nw = w_t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nw == 0.0 {
        return Err(Error::invalid("terminal vector is identically zero"));
    }
    let np = profile.norm();
    let nx = profile.samples.len();
    let mut phi: Vec<Complex64> = profile.samples.iter().map(|&v| Complex64::new(v / np, 0.0)).collect();
    xi_transform(&mut phi, nx, 1, false);
    let dim = w_t.len();
    let mut amps = vec![ZERO; nx * dim];
    for m in 0..nx {
        for j in 0..dim {
            amps[m * dim + j] = phi[m] * (w_t[j] / nw);
        }
    }
    Ok(StateVector {
        amplitudes: amps,
        xi_points: nx,
        system_dim: dim,
        norm: np * nw,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 1e-14 && tol < 1e-4) {
        return Err(Error::invalid(format!("evolution tolerance must lie in (1e-14, 1e-4), got {tol}")));
    }
    Ok(())
}

/// `ψ(0) = e^{−iHt} ψ(T)` by Krylov propagation of the full Hamiltonian.
pub fn evolve(sys: &SchrodingerSystem, psi: &StateVector, t: f64, tol: f64) -> Result<StateVector> {
    check_tol(tol)?;
    let out = lanczos_expm_action(&sys.hamiltonian, t, &psi.amplitudes, tol)?;
    Ok(StateVector {
        amplitudes: out,
        ..psi.clone()
    })
}

enum Block {
    Dense { vectors: DMatrix<Complex64>, values: DVector<f64> },
    Sparse(ComplexOperator),
}

/// Propagator exploiting the block-diagonal structure of `H` over `η`.
///
/// Each block `H_m = −η_m S1 + S2` is diagonalised once (dense, for system
/// dimensions up to `dense_limit`) or propagated by Lanczos, so repeated
/// evolutions over equal intervals are cheap.
pub struct BlockPropagator {
    blocks: Vec<Block>,
    dim: usize,
}

impl BlockPropagator {
    pub fn new(s1: &SparseOperator, s2: &ComplexOperator, xi: &XiGrid, dense_limit: usize) -> Result<Self> {
        let dim = s1.dim_rows();
        if s2.dim_rows() != dim {
            return Err(Error::invalid("S1 and S2 dimensions differ"));
        }
        let s1c = s1.to_complex();
        let blocks = xi
            .eta_diag
            .par_iter()
            .map(|&eta| {
                let h = s1c.scale(Complex64::new(-eta, 0.0)).add(s2);
                if dim <= dense_limit {
                    let eig = SymmetricEigen::new(h.to_dense());
                    Block::Dense {
                        vectors: eig.eigenvectors,
                        values: eig.eigenvalues,
                    }
                } else {
                    Block::Sparse(h)
                }
            })
            .collect();
        Ok(Self { blocks, dim })
    }

    /// Applies `e^{−iHt}`.
    pub fn apply(&self, psi: &StateVector, t: f64, tol: f64) -> Result<StateVector> {
        check_tol(tol)?;
        let dim = self.dim;
        if psi.system_dim != dim || psi.xi_points != self.blocks.len() {
            return Err(Error::invalid("state layout does not match the propagator"));
        }
        let out: Result<Vec<Vec<Complex64>>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(m, block)| {
                let x = &psi.amplitudes[m * dim..(m + 1) * dim];
                match block {
                    Block::Dense { vectors, values } => {
                        let xv = DVector::from_column_slice(x);
                        let mut c = vectors.ad_mul(&xv);
                        for (ci, &lam) in c.iter_mut().zip(values.iter()) {
                            *ci *= Complex64::new(0.0, -lam * t).exp();
                        }
                        Ok((vectors * c).as_slice().to_vec())
                    }
                    Block::Sparse(h) => lanczos_expm_action(h, t, x, tol),
                }
            })
            .collect();
        Ok(StateVector {
            amplitudes: out?.concat(),
            ..psi.clone()
        })
    }
}

/// How the `ξ` register is contracted after postselection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contraction {
    /// Project onto the normalised `e^{−ξ}` profile over the retained window.
    #[default]
    Weighted,
    /// Read the single `ξ` slice at the window threshold.
    Slice,
}

/// Postselected solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Unit-norm direction of `w(0)` on the system register.
    pub direction: Vec<f64>,
    /// Probability of landing in the retained `ξ` window.
    pub p_post: f64,
    /// Relative size of the discarded imaginary part of the contraction.
    pub imaginary_leakage: f64,
}

/// Inverse-transforms the `ξ` register, postselects `ξ_k ≥ λt` and contracts.
pub fn recover(psi0: &StateVector, xi: &XiGrid, lambda: f64, t: f64, mode: Contraction) -> Result<Recovery> {
    let dim = psi0.system_dim;
    let mut x = psi0.amplitudes.clone();
    xi_transform(&mut x, psi0.xi_points, dim, true);
    let k0 = xi.threshold_index(lambda * t);
    if k0 >= xi.points {
        return Err(Error::numerical("postselection window is empty; enlarge the ξ half-width"));
    }
    let p_post: f64 = x[k0 * dim..].iter().map(|z| z.norm_sqr()).sum();
    if p_post < 1e-12 {
        return Err(Error::numerical(format!("postselection probability {p_post:.3e} is degenerate")));
    }
    let mut v = vec![ZERO; dim];
    match mode {
        Contraction::Weighted => {
            for k in k0..xi.points {
                let wgt = (-xi.xi(k)).exp();
                for j in 0..dim {
                    v[j] += x[k * dim + j] * wgt;
                }
            }
        }
        Contraction::Slice => v.copy_from_slice(&x[k0 * dim..(k0 + 1) * dim]),
    }
    let re: f64 = v.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let im: f64 = v.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    if re == 0.0 {
        return Err(Error::numerical("recovered direction vanished"));
    }
    Ok(Recovery {
        direction: v.iter().map(|z| z.re / re).collect(),
        p_post,
        imaginary_leakage: im / re,
    })
}

/// Ratio `C = Σ_{ξ_k ≥ λt} Φ₀² / Σ_k Φ₀²` of the ideal postselection probability.
pub fn postselection_constant(profile: &CutoffProfile, xi: &XiGrid, lambda: f64, t: f64) -> f64 {
    let k0 = xi.threshold_index(lambda * t);
    let total: f64 = profile.samples.iter().map(|v| v * v).sum();
    let kept: f64 = profile.samples[k0.min(profile.samples.len())..].iter().map(|v| v * v).sum();
    kept / total
}

/// `N(0) = N(T)·√(p_post / C)`.
pub fn recover_norm(p_post: f64, nt: f64, lambda: f64, profile: &CutoffProfile, xi: &XiGrid, t: f64) -> Result<f64> {
    let c = postselection_constant(profile, xi, lambda, t);
    if !(c > 0.0) {
        return Err(Error::numerical("postselection constant is not positive"));
    }
    Ok(nt * (p_post / c).sqrt())
}

//! Reference solvers: closed-form Black–Scholes, implicit Euler and exponential
//! integration of the homogeneous system, the characteristic-function Heston
//! price and a full-truncation Euler Monte Carlo for Heston.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{band_storage, bicgstab, taylor_expm_action, BandedLu};
use crate::numerics::integrate;
use crate::pde_models::{HestonParams, HomogeneousSystem};
use crate::sparse::SparseOperator;

/// European exercise type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Black–Scholes price `SΦ(d₁) − Ke^{−rτ}Φ(d₂)`; puts via parity.
///
/// Handles the limits `σ√τ → 0` (discounted intrinsic value) and `K = 0`.
pub fn bs_analytic(s: f64, k: f64, r: f64, sigma: f64, tau: f64, kind: OptionKind) -> Result<f64> {
    if s < 0.0 || k < 0.0 || sigma < 0.0 || tau < 0.0 || ![s, k, r, sigma, tau].iter().all(|v| v.is_finite()) {
        return Err(Error::invalid(format!(
            "Black–Scholes inputs must be finite and non-negative (S={s}, K={k}, σ={sigma}, τ={tau})"
        )));
    }
    let df = (-r * tau).exp();
    let vol = sigma * tau.sqrt();
    let call = if k == 0.0 {
        s
    } else if s == 0.0 {
        0.0
    } else if vol < 1e-14 {
        (s - k * df).max(0.0)
    } else {
        let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / vol;
        let d2 = d1 - vol;
        s * std_normal_cdf(d1) - k * df * std_normal_cdf(d2)
    };
    Ok(match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - s + k * df,
    })
}

/// Splits `S` into the `V` block generator and the coupling to the constant
/// augmentation block.
fn split_blocks(hs: &HomogeneousSystem) -> (SparseOperator, Vec<f64>) {
    let n = hs.state_dim;
    let aug = &hs.terminal[n..];
    let mut a = Vec::new();
    let mut forcing = vec![0.0; n];
    for (r, c, v) in hs.s.triplets() {
        if r >= n {
            continue;
        }
        if c < n {
            a.push((r, c, v));
        } else {
            forcing[r] += v * aug[c - n];
        }
    }
    (SparseOperator::from_triplets(n, n, a), forcing)
}

/// Implicit Euler in backward time `τ = T − t`: `(I + Δτ S) w_m = w_{m−1}`.
///
/// The augmentation block has zero generator rows and therefore stays at its
/// terminal value, so only the `V` block is solved, with the coupling folded
/// into the right-hand side. Linear solves use banded LU when the band fits
/// into `10⁸` entries and BiCGSTAB to a `10⁻¹⁰` relative residual otherwise.
pub fn implicit_euler(hs: &HomogeneousSystem, t: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::invalid("implicit Euler needs at least one step"));
    }
    let n = hs.state_dim;
    let dt = t / steps as f64;
    let (a, forcing) = split_blocks(hs);
    let m = SparseOperator::identity(n).add(&a.scale(dt));
    let shift: Vec<f64> = forcing.iter().map(|f| dt * f).collect();
    let mut v = hs.terminal[..n].to_vec();
    if n <= 100_000 && band_storage(&m) <= 100_000_000 {
        let lu = BandedLu::factor(&m)?;
        for _ in 0..steps {
            let rhs: Vec<f64> = v.iter().zip(&shift).map(|(x, s)| x - s).collect();
            v = lu.solve(&rhs);
        }
    } else {
        for _ in 0..steps {
            let rhs: Vec<f64> = v.iter().zip(&shift).map(|(x, s)| x - s).collect();
            v = bicgstab(&m, &rhs, &v, 1e-10, 10_000)?;
        }
    }
    v.extend_from_slice(&hs.terminal[n..]);
    Ok(v)
}

/// `w(0) = e^{−S T} w(T)` by a substepped Taylor exponential action.
pub fn expm_action(hs: &HomogeneousSystem, t: f64, tol: f64) -> Result<Vec<f64>> {
    taylor_expm_action(&hs.s, -t, &hs.terminal, tol)
}

/// Semi-analytic Heston call and put.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonPrice {
    pub call: f64,
    pub put: f64,
}

/// Upper limit of the Fourier integrals.
pub const HESTON_U_MAX: f64 = 200.0;

/// Characteristic-function integrand for `P_j` in the branch-continuous form
/// (the `g = (b − ρσiu − d)/(b − ρσiu + d)` variant, which keeps
/// `|g e^{−dτ}| < 1` and avoids jumps of the complex logarithm).
fn heston_pj_integrand(u: f64, j: usize, p: &HestonParams, s0: f64, v0: f64, k: f64, tau: f64) -> f64 {
    let (kappa, theta, sigma, rho, r) = (p.kappa[0], p.theta[0], p.sigma[0], p.gamma_sv[(0, 0)], p.rate);
    let i = Complex64::new(0.0, 1.0);
    let (uj, bj) = if j == 1 { (0.5, kappa - rho * sigma) } else { (-0.5, kappa) };
    let a = kappa * theta;
    let x = s0.ln();
    let iu = i * u;
    let beta = bj - rho * sigma * iu;
    let d = (beta * beta - sigma * sigma * (2.0 * uj * iu - u * u)).sqrt();
    let g = (beta - d) / (beta + d);
    let e = (-d * tau).exp();
    let c = r * iu * tau + a / (sigma * sigma) * ((beta - d) * tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
    let dd = (beta - d) / (sigma * sigma) * (1.0 - e) / (1.0 - g * e);
    let f = (c + dd * v0 + iu * x).exp();
    ((-iu * k.ln()).exp() * f / iu).re
}

/// Heston price from the two characteristic-function probabilities `P₁, P₂`,
/// each integrated adaptively on `(0, U_max]` to relative tolerance `10⁻⁹`.
pub fn heston_semianalytic(p: &HestonParams, s0: f64, v0: f64, k: f64, tau: f64) -> Result<HestonPrice> {
    if p.assets() != 1 {
        return Err(Error::Unsupported("the semi-analytic Heston price is single-asset only".into()));
    }
    p.validate()?;
    if !(s0 > 0.0 && v0 >= 0.0 && k > 0.0 && tau > 0.0) {
        return Err(Error::invalid(format!("invalid Heston point (S0={s0}, v0={v0}, K={k}, τ={tau})")));
    }
    let mut probs = [0.0; 2];
    for (slot, j) in probs.iter_mut().zip([1usize, 2]) {
        let f = |u: f64| heston_pj_integrand(u, j, p, s0, v0, k, tau);
        let tail = f(HESTON_U_MAX).abs();
        if tail > 1e-8 {
            return Err(Error::numerical(format!("Heston integrand tail {tail:.2e} at U_max is not negligible")));
        }
        let val = integrate(f, 1e-12, HESTON_U_MAX, 1e-9, 1e-13)?;
        *slot = 0.5 + val / std::f64::consts::PI;
    }
    let df = (-p.rate * tau).exp();
    let call = s0 * probs[0] - k * df * probs[1];
    let put = k * df * (1.0 - probs[1]) - s0 * (1.0 - probs[0]);
    Ok(HestonPrice { call, put })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
}

/// Heston call by full-truncation Euler Monte Carlo.
///
/// Paths are split into fixed chunks, each driven by its own ChaCha stream
/// derived from `seed`, so results are independent of the thread count.
pub fn heston_mc(
    p: &HestonParams,
    s0: f64,
    v0: f64,
    k: f64,
    tau: f64,
    paths: usize,
    steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if p.assets() != 1 || paths < 2 || steps == 0 {
        return Err(Error::invalid("Heston Monte Carlo needs one asset, ≥ 2 paths and ≥ 1 step"));
    }
    let (kappa, theta, sigma, rho, r) = (p.kappa[0], p.theta[0], p.sigma[0], p.gamma_sv[(0, 0)], p.rate);
    let dt = tau / steps as f64;
    let sq = dt.sqrt();
    let rho_c = (1.0 - rho * rho).sqrt();
    const CHUNK: usize = 16_384;
    let chunks = paths.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(paths - c * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let (mut x, mut v) = (s0.ln(), v0);
                for _ in 0..steps {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    let vp = v.max(0.0);
                    x += (r - 0.5 * vp) * dt + vp.sqrt() * sq * z1;
                    v += kappa * (theta - vp) * dt + sigma * vp.sqrt() * sq * (rho * z1 + rho_c * z2);
                }
                let pay = (x.exp() - k).max(0.0);
                s1 += pay;
                s2 += pay * pay;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = paths as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    let df = (-r * tau).exp();
    Ok(McEstimate {
        price: df * mean,
        std_error: df * (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdgrid::build_axis;
    use crate::pde_models::{assemble_bs1d, augment_scalar, BsParams};
    use crate::payoffs::{sample_payoff, PayoffSpec};
    use crate::fdgrid::TensorGrid;

    #[test]
    fn bs_limits_and_parity() {
        assert!((bs_analytic(50.0, 40.0, 0.03, 0.0, 1.0, OptionKind::Call).unwrap() - (50.0 - 40.0 * (-0.03f64).exp())).abs() < 1e-12);
        assert_eq!(bs_analytic(50.0, 0.0, 0.03, 0.2, 1.0, OptionKind::Call).unwrap(), 50.0);
        for &(s, k) in &[(50.0, 60.0), (80.0, 75.0), (10.0, 100.0)] {
            let c = bs_analytic(s, k, 0.03, 0.25, 0.7, OptionKind::Call).unwrap();
            let p = bs_analytic(s, k, 0.03, 0.25, 0.7, OptionKind::Put).unwrap();
            assert!((c - p - (s - k * (-0.03f64 * 0.7).exp())).abs() < 1e-12);
        }
        assert!(bs_analytic(-1.0, 1.0, 0.0, 0.1, 1.0, OptionKind::Call).is_err());
    }

    #[test]
    fn bs_matches_lognormal_quadrature() {
        let (s, k, r, sig, tau): (f64, f64, f64, f64, f64) = (50.0, 60.0, 0.03, 0.05, 1.0);
        let m = (s.ln()) + (r - 0.5 * sig * sig) * tau;
        let sd = sig * tau.sqrt();
        let f = |z: f64| {
            let st = (m + sd * z).exp();
            (st - k).max(0.0) * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        let z0 = (k.ln() - m) / sd;
        let q = (-r * tau).exp() * integrate(f, z0, 40.0, 1e-13, 1e-16).unwrap();
        let a = bs_analytic(s, k, r, sig, tau, OptionKind::Call).unwrap();
        assert!((a - q).abs() < 1e-10, "{a} vs {q}");
    }

    #[test]
    fn implicit_euler_scalar_and_identity() {
        let hs = HomogeneousSystem {
            s: SparseOperator::from_triplets(2, 2, vec![(0, 0, 1.0)]),
            terminal: vec![2.0, 1.0],
            augmentation: crate::pde_models::Augmentation::Scalar,
            state_dim: 1,
            scale: 1.0,
        };
        let w = implicit_euler(&hs, 0.5, 1).unwrap();
        assert!((w[0] - 2.0 / 1.5).abs() < 1e-15 && w[1] == 1.0);
        let zero = HomogeneousSystem {
            s: SparseOperator::zeros(2, 2),
            ..hs.clone()
        };
        assert_eq!(implicit_euler(&zero, 1.0, 7).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn table1_fd_solution_is_close_to_analytic() {
        let p = BsParams::single(0.03, 1.0, 0.05);
        let ax = build_axis("S", 0.0, 120.0, 6).unwrap();
        let sys = assemble_bs1d(&p, &ax, 60.0).unwrap();
        let grid = TensorGrid::new(vec![ax.clone()]).unwrap();
        let vt = sample_payoff(&PayoffSpec::call(60.0), &grid).unwrap();
        let hs = augment_scalar(&sys, &vt).unwrap();
        let w = implicit_euler(&hs, 1.0, 4096).unwrap();
        let e = expm_action(&hs, 1.0, 1e-13).unwrap();
        for k in 0..64 {
            let s = ax.coord(k);
            assert!(w[k] >= -1e-6 * 120.0);
            if s <= 100.0 {
                let a = bs_analytic(s, 60.0, 0.03, 0.05, 1.0, OptionKind::Call).unwrap();
                assert!((w[k] - a).abs() < 0.05, "S={s}: {} vs {a}", w[k]);
                assert!((e[k] - a).abs() < 0.05);
            }
        }
    }

    fn table2() -> HestonParams {
        HestonParams::single(0.03, 1.0, 2.0, 0.12, 0.4, -0.1)
    }

    #[test]
    fn heston_parity_and_bs_limit() {
        let p = table2();
        let h = heston_semianalytic(&p, 70.0, 0.25, 75.0, 1.0).unwrap();
        assert!((h.call - h.put - (70.0 - 75.0 * (-0.03f64).exp())).abs() < 1e-6);
        let flat = HestonParams::single(0.03, 1.0, 2.0, 0.04, 1e-4, 0.0);
        let h = heston_semianalytic(&flat, 100.0, 0.04, 95.0, 1.0).unwrap();
        let bs = bs_analytic(100.0, 95.0, 0.03, 0.2, 1.0, OptionKind::Call).unwrap();
        assert!((h.call - bs).abs() < 1e-4, "{} vs {bs}", h.call);
    }

    #[test]
    fn heston_monotone_in_strike_and_variance() {
        let p = table2();
        let mut last = f64::INFINITY;
        for k in [50.0, 60.0, 75.0, 90.0, 120.0] {
            let c = heston_semianalytic(&p, 70.0, 0.25, k, 1.0).unwrap().call;
            assert!(c < last);
            last = c;
        }
        let lo = heston_semianalytic(&p, 70.0, 0.1, 75.0, 1.0).unwrap().call;
        let hi = heston_semianalytic(&p, 70.0, 0.3, 75.0, 1.0).unwrap().call;
        assert!(hi > lo);
    }

    #[test]
    fn heston_matches_monte_carlo() {
        let p = table2();
        let sa = heston_semianalytic(&p, 70.0, 0.25, 75.0, 1.0).unwrap().call;
        let mc = heston_mc(&p, 70.0, 0.25, 75.0, 1.0, 200_000, 200, 7).unwrap();
        assert!((mc.price - sa).abs() < 3.0 * mc.std_error + 0.02, "{} ± {} vs {sa}", mc.price, mc.std_error);
        let again = heston_mc(&p, 70.0, 0.25, 75.0, 1.0, 20_000, 10, 7).unwrap();
        assert_eq!(again, heston_mc(&p, 70.0, 0.25, 75.0, 1.0, 20_000, 10, 7).unwrap());
    }
}

//! Implied volatilities, SSVI slice calibration under the sufficient
//! no-butterfly constraints, the Durrleman `g` diagnostic and the implied
//! (Breeden–Litzenberger) density.
//!
//! The SSVI slice is `w(k) = (θ/2)(1 + ρφk + √((φk + ρ)² + 1 − ρ²))` with the
//! Heston-like `φ(θ; λ) = (1/(λθ))(1 − (1 − e^{−λθ})/(λθ))`, where `k` is
//! log-moneyness against the forward and `w` is total implied variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Normal};

use crate::classical_baselines::{bs_analytic, OptionKind};
use crate::error::{Error, Result};
use crate::numerics::{brent_root, nelder_mead};

/// Default slack `ε_cons` in the constraint `θφ(1 + |ρ|) ≤ 4 − ε_cons`.
pub const DEFAULT_EPS_CONS: f64 = 1e-3;

/// Quotes at one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileSlice {
    pub maturity: f64,
    /// Forward `F = S₀e^{rT}`.
    pub forward: f64,
    pub strikes: Vec<f64>,
    pub vols: Vec<f64>,
}

impl SmileSlice {
    pub fn new(s0: f64, rate: f64, maturity: f64, strikes: Vec<f64>, vols: Vec<f64>) -> Result<Self> {
        if strikes.len() != vols.len() {
            return Err(Error::invalid("strikes and vols differ in length"));
        }
        if !(maturity > 0.0 && s0 > 0.0) {
            return Err(Error::invalid("maturity and spot must be positive"));
        }
        if strikes.windows(2).any(|w| !(w[1] > w[0])) || strikes.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::invalid("strikes must be positive and strictly increasing"));
        }
        if vols.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("implied vols must be positive"));
        }
        Ok(Self {
            maturity,
            forward: s0 * (rate * maturity).exp(),
            strikes,
            vols,
        })
    }

    /// `k_i = ln(K_i / F)`.
    pub fn log_moneyness(&self) -> Vec<f64> {
        self.strikes.iter().map(|k| (k / self.forward).ln()).collect()
    }

    /// `w_i = σ_i² T`.
    pub fn total_variance(&self) -> Vec<f64> {
        self.vols.iter().map(|v| v * v * self.maturity).collect()
    }
}

/// SSVI slice parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsviParams {
    pub theta: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl SsviParams {
    /// `θφ(θ)`.
    pub fn theta_phi(&self) -> f64 {
        self.theta * ssvi_phi(self.theta, self.lambda)
    }

    /// True when both sufficient no-butterfly constraints hold with slack `eps_cons`.
    pub fn is_feasible(&self, eps_cons: f64) -> bool {
        self.constraint_violation(eps_cons) <= 0.0
            && self.theta > 0.0
            && self.lambda > 0.0
            && self.rho.abs() < 1.0
    }

    /// Largest positive excess over the two constraints (zero when satisfied).
    pub fn constraint_violation(&self, eps_cons: f64) -> f64 {
        let phi = ssvi_phi(self.theta, self.lambda);
        let a = self.theta * phi * (1.0 + self.rho.abs()) - (4.0 - eps_cons);
        let b = self.theta * phi * phi * (1.0 + self.rho.abs()) - 4.0;
        a.max(b).max(0.0)
    }

    /// Lee wing slopes `(θφ/2)(1 − ρ)` (left) and `(θφ/2)(1 + ρ)` (right);
    /// reported only, no bound is enforced.
    pub fn wing_slopes(&self) -> (f64, f64) {
        let tp = self.theta_phi();
        (0.5 * tp * (1.0 - self.rho), 0.5 * tp * (1.0 + self.rho))
    }
}

/// Heston-like `φ(θ; λ)`, with the series `½ − x/6 + x²/24` for `x = λθ < 10⁻⁴`.
pub fn ssvi_phi(theta: f64, lambda: f64) -> f64 {
    let x = lambda * theta;
    if x < 1e-4 {
        0.5 - x / 6.0 + x * x / 24.0
    } else {
        (1.0 - (1.0 - (-x).exp()) / x) / x
    }
}

/// SSVI total variance `w(k)`.
pub fn ssvi_w(k: f64, p: &SsviParams) -> f64 {
    let phi = ssvi_phi(p.theta, p.lambda);
    let z = phi * k + p.rho;
    0.5 * p.theta * (1.0 + p.rho * phi * k + (z * z + 1.0 - p.rho * p.rho).sqrt())
}

/// Analytic `(w, w′, w″)` of the SSVI slice.
pub fn ssvi_derivatives(k: f64, p: &SsviParams) -> (f64, f64, f64) {
    let phi = ssvi_phi(p.theta, p.lambda);
    let z = phi * k + p.rho;
    let r = (z * z + 1.0 - p.rho * p.rho).sqrt();
    let w = 0.5 * p.theta * (1.0 + p.rho * phi * k + r);
    let w1 = 0.5 * p.theta * phi * (p.rho + z / r);
    let w2 = 0.5 * p.theta * phi * phi * (1.0 - p.rho * p.rho) / (r * r * r);
    (w, w1, w2)
}

/// `g = (1 − kw′/(2w))² − (w′²/4)(1/w + 1/4) + w″/2`.
pub fn g_from_derivatives(k: f64, w: f64, w1: f64, w2: f64) -> f64 {
    let a = 1.0 - k * w1 / (2.0 * w);
    a * a - 0.25 * w1 * w1 * (1.0 / w + 0.25) + 0.5 * w2
}

/// Durrleman `g` of an arbitrary total-variance curve, with central finite
/// differences of step `h`.
pub fn durrleman_g_of(w: impl Fn(f64) -> f64, k: f64, h: f64) -> f64 {
    let (wm, w0, wp) = (w(k - h), w(k), w(k + h));
    let w1 = (wp - wm) / (2.0 * h);
    let w2 = (wp - 2.0 * w0 + wm) / (h * h);
    g_from_derivatives(k, w0, w1, w2)
}

/// Durrleman `g` of an SSVI slice by central differences with `h = 10⁻⁵`.
pub fn durrleman_g(p: &SsviParams, k: f64) -> f64 {
    durrleman_g_of(|x| ssvi_w(x, p), k, 1e-5)
}

/// Durrleman `g` of an SSVI slice from analytic derivatives.
pub fn durrleman_g_exact(p: &SsviParams, k: f64) -> f64 {
    let (w, w1, w2) = ssvi_derivatives(k, p);
    g_from_derivatives(k, w, w1, w2)
}

/// Minimum of `g` over a uniform grid of `points` nodes on `[lo, hi]`.
pub fn min_g(p: &SsviParams, lo: f64, hi: f64, points: usize) -> f64 {
    (0..points)
        .map(|i| durrleman_g(p, lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .fold(f64::INFINITY, f64::min)
}

/// Black–Scholes implied volatility by Brent's method on `σ ∈ [10⁻⁶, 5]`.
///
/// Prices outside the open no-arbitrage band — `(max(S₀ − Ke^{−rT}, 0), S₀)`
/// for calls, `(max(Ke^{−rT} − S₀, 0), Ke^{−rT})` for puts — are rejected
/// with a report of the violated bound.
pub fn implied_vol(price: f64, s0: f64, k: f64, r: f64, t: f64, kind: OptionKind) -> Result<f64> {
    let df = (-r * t).exp();
    let (lo, hi) = match kind {
        OptionKind::Call => ((s0 - k * df).max(0.0), s0),
        OptionKind::Put => ((k * df - s0).max(0.0), k * df),
    };
    if !(price > lo) {
        return Err(Error::invalid(format!(
            "no-arbitrage violation: price {price} is not above the lower bound {lo} (K = {k})"
        )));
    }
    if !(price < hi) {
        return Err(Error::invalid(format!(
            "no-arbitrage violation: price {price} is not below the upper bound {hi} (K = {k})"
        )));
    }
    let f = |s: f64| bs_analytic(s0, k, r, s, t, kind).unwrap_or(f64::NAN) - price;
    let (a, b) = (1e-6, 5.0);
    if f(a) > 0.0 || f(b) < 0.0 {
        return Err(Error::invalid(format!(
            "price {price} at K = {k} implies a volatility outside [1e-6, 5]"
        )));
    }
    let sigma = brent_root(f, a, b, 1e-15, 200)?;
    if f(sigma).abs() > 1e-10 * s0 {
        return Err(Error::numerical(format!("implied vol at K = {k} did not reach the price tolerance")));
    }
    Ok(sigma)
}

/// Quote weighting in the calibration objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteWeights {
    #[default]
    Uniform,
    /// Black–Scholes vega of each quote.
    Vega,
}

/// A calibrated slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsviFit {
    pub params: SsviParams,
    /// Weighted mean squared residual in total variance.
    pub objective: f64,
    /// Root-mean-square residual in total variance.
    pub rms: f64,
}

fn weights_for(slice: &SliceData, mode: QuoteWeights) -> Vec<f64> {
    match mode {
        QuoteWeights::Uniform => vec![1.0; slice.k.len()],
        QuoteWeights::Vega => slice
            .k
            .iter()
            .zip(&slice.w)
            .map(|(&k, &w)| {
                let sw = w.sqrt();
                let d1 = -k / sw + 0.5 * sw;
                Normal::standard().pdf(d1).max(1e-12)
            })
            .collect(),
    }
}

struct SliceData {
    k: Vec<f64>,
    w: Vec<f64>,
}

/// Raises `λ` (which lowers `θφ`) until both constraints hold.
fn project(mut p: SsviParams, eps_cons: f64) -> Option<SsviParams> {
    if p.is_feasible(eps_cons) {
        return Some(p);
    }
    if !(p.theta > 0.0) || p.rho.abs() >= 1.0 {
        return None;
    }
    let mut hi = p.lambda.max(1e-8);
    for _ in 0..200 {
        hi *= 2.0;
        if (SsviParams { lambda: hi, ..p }).is_feasible(eps_cons) {
            break;
        }
    }
    if !(SsviParams { lambda: hi, ..p }).is_feasible(eps_cons) {
        return None;
    }
    let mut lo = p.lambda;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (SsviParams { lambda: mid, ..p }).is_feasible(eps_cons) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    p.lambda = hi;
    Some(p)
}

/// Constrained weighted least-squares SSVI calibration of one slice.
///
/// Starts from `θ` = total variance of the quote closest to the money,
/// `ρ = 0`, `λ = 1`, and from four deterministic perturbations of it; each
/// start runs a simplex search in `(ln θ, atanh ρ, ln λ)` with a quadratic
/// constraint penalty, followed by a feasibility projection. The best feasible
/// result (ties broken by parameters) is returned.
pub fn fit_ssvi(slice: &SmileSlice, weights: QuoteWeights, eps_cons: f64) -> Result<SsviFit> {
    if slice.strikes.len() < 3 {
        return Err(Error::invalid("SSVI calibration needs at least three quotes"));
    }
    let data = SliceData {
        k: slice.log_moneyness(),
        w: slice.total_variance(),
    };
    let wts = weights_for(&data, weights);
    let wsum: f64 = wts.iter().sum();
    let objective = |p: &SsviParams| -> f64 {
        data.k
            .iter()
            .zip(&data.w)
            .zip(&wts)
            .map(|((&k, &w), &c)| c * (ssvi_w(k, p) - w).powi(2))
            .sum::<f64>()
            / wsum
    };
    let atm = (0..data.k.len())
        .min_by(|&a, &b| data.k[a].abs().total_cmp(&data.k[b].abs()))
        .expect("non-empty slice");
    let theta0 = data.w[atm];
    let scale = data.w.iter().map(|w| w * w).sum::<f64>() / data.w.len() as f64;
    let decode = |x: &[f64]| SsviParams {
        theta: x[0].exp(),
        rho: x[1].tanh(),
        lambda: x[2].exp(),
    };
    let starts: [(f64, f64, f64); 5] = [
        (theta0, 0.0, 1.0),
        (theta0, -0.5, 1.0),
        (theta0, 0.5, 1.0),
        (theta0 * 1.2, -0.2, 5.0),
        (theta0 * 0.8, 0.2, 0.2),
    ];
    let results: Vec<Option<(f64, SsviParams)>> = starts
        .par_iter()
        .map(|&(t0, r0, l0)| {
            let start = project(SsviParams { theta: t0, rho: r0, lambda: l0 }, eps_cons)?;
            let x0 = [start.theta.ln(), start.rho.atanh(), start.lambda.ln()];
            let f = |x: &[f64]| {
                let p = decode(x);
                let v = p.constraint_violation(eps_cons);
                objective(&p) / scale + 1e6 * v * v
            };
            let mut x = x0.to_vec();
            for _ in 0..3 {
                x = nelder_mead(f, &x, &[0.2, 0.3, 0.5], 1e-20, 4000).x;
            }
            let p = project(decode(&x), eps_cons)?;
            Some((objective(&p), p))
        })
        .collect();
    let best = results
        .into_iter()
        .flatten()
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.theta.total_cmp(&b.1.theta))
                .then(a.1.rho.total_cmp(&b.1.rho))
                .then(a.1.lambda.total_cmp(&b.1.lambda))
        })
        .ok_or_else(|| Error::numerical("no feasible SSVI start after projection"))?;
    let rms = (data.k.iter().zip(&data.w).map(|(&k, &w)| (ssvi_w(k, &best.1) - w).powi(2)).sum::<f64>()
        / data.k.len() as f64)
        .sqrt();
    Ok(SsviFit {
        params: best.1,
        objective: best.0,
        rms,
    })
}

/// Implied density of `k = ln(K/F)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub k: Vec<f64>,
    pub density: Vec<f64>,
    /// `g` at each node.
    pub g: Vec<f64>,
    pub min_density: f64,
    /// True when any node has `g < 0` (butterfly arbitrage).
    pub butterfly: bool,
}

/// Density of log-moneyness implied by a total-variance curve:
/// `q(k) = n(d₋(k)) g(k) / √w(k)` with `d₋ = −k/√w − √w/2`, i.e. `K·e^{rT}∂²C/∂K²`.
pub fn density_from_total_variance(w: impl Fn(f64) -> f64, ks: &[f64]) -> DensityReport {
    let n = Normal::standard();
    let mut dens = Vec::with_capacity(ks.len());
    let mut gs = Vec::with_capacity(ks.len());
    for &k in ks {
        let wk = w(k);
        let sw = wk.sqrt();
        let g = durrleman_g_of(&w, k, 1e-5);
        gs.push(g);
        dens.push(n.pdf(-k / sw - 0.5 * sw) * g / sw);
    }
    let min_density = dens.iter().cloned().fold(f64::INFINITY, f64::min);
    DensityReport {
        k: ks.to_vec(),
        butterfly: gs.iter().any(|&g| g < 0.0),
        density: dens,
        g: gs,
        min_density,
    }
}

/// Implied density of an SSVI slice.
pub fn implied_density(p: &SsviParams, ks: &[f64]) -> DensityReport {
    density_from_total_variance(|k| ssvi_w(k, p), ks)
}

/// Natural cubic spline through `(x_i, y_i)`, used to interpolate raw quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spline needs ≥ 3 strictly increasing nodes"));
        }
        // Tridiagonal system for the second derivatives with natural ends.
        let mut diag = vec![1.0; n];
        let mut upper = vec![0.0; n];
        let mut lower = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            lower[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        for i in 1..n {
            let f = lower[i] / diag[i - 1];
            diag[i] -= f * upper[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
        Ok(Self { x, y, m })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_series_and_closed_form() {
        assert!((ssvi_phi(1e-9, 1.0) - 0.5).abs() < 1e-9);
        let x: f64 = 1e-3;
        let direct = (1.0 - (1.0 - (-x).exp()) / x) / x;
        let series = 0.5 - x / 6.0 + x * x / 24.0;
        assert!((direct - series).abs() < 1e-10);
        assert!((ssvi_phi(1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let mut last = 0.0;
        for i in 0..200 {
            let th = 1e-4 * (1e5f64).powf(i as f64 / 199.0);
            let v = th * ssvi_phi(th, 2.0);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn slice_shape() {
        let p = SsviParams { theta: 0.05, rho: -0.3, lambda: 2.0 };
        assert_eq!(ssvi_w(0.0, &p), 0.05);
        let q = SsviParams { rho: 0.0, ..p };
        assert!((ssvi_w(0.7, &q) - ssvi_w(-0.7, &q)).abs() < 1e-16);
        let tp = p.theta_phi();
        // Far-wing secant slopes approach θφ(1 ± ρ)/2.
        let right = (ssvi_w(60.0, &p) - ssvi_w(50.0, &p)) / 10.0;
        let left = (ssvi_w(-60.0, &p) - ssvi_w(-50.0, &p)) / 10.0;
        assert!((right / (0.5 * tp * (1.0 - 0.3)) - 1.0).abs() < 1e-3);
        assert!((left / (0.5 * tp * (1.0 + 0.3)) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn finite_difference_g_matches_analytic() {
        let p = SsviParams { theta: 0.08, rho: -0.4, lambda: 1.5 };
        for &k in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            assert!((durrleman_g(&p, k) - durrleman_g_exact(&p, k)).abs() < 1e-5);
        }
        assert_eq!(durrleman_g_of(|_| 0.04, 0.3, 1e-5), 1.0);
    }

    #[test]
    fn implied_vol_round_trip_and_band() {
        let c = bs_analytic(100.0, 110.0, 0.03, 0.2, 1.0, OptionKind::Call).unwrap();
        assert!((implied_vol(c, 100.0, 110.0, 0.03, 1.0, OptionKind::Call).unwrap() - 0.2).abs() < 1e-8);
        let intrinsic = 100.0 - 80.0 * (-0.03f64).exp();
        assert!(implied_vol(intrinsic - 1e-6, 100.0, 80.0, 0.03, 1.0, OptionKind::Call).is_err());
        let p = bs_analytic(100.0, 90.0, 0.03, 0.35, 0.5, OptionKind::Put).unwrap();
        assert!((implied_vol(p, 100.0, 90.0, 0.03, 0.5, OptionKind::Put).unwrap() - 0.35).abs() < 1e-8);
    }

    #[test]
    fn projection_restores_feasibility() {
        let p = SsviParams { theta: 20.0, rho: 0.5, lambda: 1e-3 };
        assert!(!p.is_feasible(DEFAULT_EPS_CONS));
        let q = project(p, DEFAULT_EPS_CONS).unwrap();
        assert!(q.is_feasible(DEFAULT_EPS_CONS) && q.lambda > p.lambda);
    }

    #[test]
    fn spline_interpolates_cubics_inside() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let s = CubicSpline::new(x, y).unwrap();
        assert!((s.eval(2.5) - 6.0).abs() < 1e-14);
    }
}

//! SSVI calibration, Durrleman diagnostic and implied-density checks against
//! closed-form oracles.

use proptest::prelude::*;
use statrs::distribution::{Continuous, Normal};

use qpde::classical_baselines::{bs_analytic, OptionKind};
use qpde::smile_toolkit::{
    density_from_total_variance, durrleman_g, durrleman_g_exact, fit_ssvi, implied_density, implied_vol, min_g,
    ssvi_w, CubicSpline, QuoteWeights, SmileSlice, SsviParams, DEFAULT_EPS_CONS,
};

const S0: f64 = 100.0;
const R: f64 = 0.02;
const T: f64 = 1.0;

fn slice_from(p: &SsviParams, strikes: &[f64]) -> SmileSlice {
    let f = S0 * (R * T).exp();
    let vols = strikes.iter().map(|k| (ssvi_w((k / f).ln(), p) / T).sqrt()).collect();
    SmileSlice::new(S0, R, T, strikes.to_vec(), vols).unwrap()
}

fn w_rms(a: &SsviParams, b: &SsviParams, ks: &[f64]) -> f64 {
    (ks.iter().map(|&k| (ssvi_w(k, a) - ssvi_w(k, b)).powi(2)).sum::<f64>() / ks.len() as f64).sqrt()
}

#[test]
fn synthetic_quotes_recover_known_parameters() {
    let truth = SsviParams { theta: 0.05, rho: -0.3, lambda: 2.0 };
    let strikes = [70.0, 80.0, 90.0, 100.0, 110.0, 120.0, 135.0];
    let slice = slice_from(&truth, &strikes);
    let fit = fit_ssvi(&slice, QuoteWeights::Uniform, DEFAULT_EPS_CONS).unwrap();
    assert!(fit.rms <= 1e-4, "rms {}", fit.rms);
    assert!(w_rms(&fit.params, &truth, &slice.log_moneyness()) <= 1e-4);
    assert!(fit.params.is_feasible(DEFAULT_EPS_CONS));
    let vega = fit_ssvi(&slice, QuoteWeights::Vega, DEFAULT_EPS_CONS).unwrap();
    assert!(vega.rms <= 1e-4);
}

#[test]
fn fitting_is_idempotent() {
    let strikes = [60.0, 75.0, 90.0, 100.0, 110.0, 125.0, 150.0];
    let noisy: Vec<f64> = [0.31, 0.27, 0.245, 0.235, 0.232, 0.236, 0.25].to_vec();
    let first = fit_ssvi(&SmileSlice::new(S0, R, T, strikes.to_vec(), noisy).unwrap(), QuoteWeights::Uniform, DEFAULT_EPS_CONS)
        .unwrap();
    let again = fit_ssvi(&slice_from(&first.params, &strikes), QuoteWeights::Uniform, DEFAULT_EPS_CONS).unwrap();
    let ks: Vec<f64> = (0..=40).map(|i| -1.0 + 0.05 * i as f64).collect();
    let gap = ks
        .iter()
        .map(|&k| (ssvi_w(k, &first.params) - ssvi_w(k, &again.params)).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-6, "gap {gap}");
}

#[test]
fn flat_quotes_give_a_flat_fit() {
    let strikes = [80.0, 90.0, 95.0, 100.0, 105.0, 110.0, 120.0];
    let slice = SmileSlice::new(S0, R, T, strikes.to_vec(), vec![0.2; strikes.len()]).unwrap();
    let fit = fit_ssvi(&slice, QuoteWeights::Uniform, DEFAULT_EPS_CONS).unwrap();
    for k in slice.log_moneyness() {
        assert!((ssvi_w(k, &fit.params) - 0.04).abs() < 1e-5);
    }
    // The at-the-money skew θφρ/2 vanishes.
    let skew = 0.5 * fit.params.theta_phi() * fit.params.rho;
    assert!(skew.abs() < 1e-4, "skew {skew}");
}

#[test]
fn fit_rejects_short_slices() {
    let slice = SmileSlice::new(S0, R, T, vec![90.0, 110.0], vec![0.2, 0.2]).unwrap();
    assert!(fit_ssvi(&slice, QuoteWeights::Uniform, DEFAULT_EPS_CONS).is_err());
    assert!(SmileSlice::new(S0, R, T, vec![110.0, 90.0, 100.0], vec![0.2; 3]).is_err());
}

#[test]
fn finite_difference_g_agrees_with_analytic_at_test_points() {
    let p = SsviParams { theta: 0.12, rho: -0.25, lambda: 0.8 };
    for &k in &[-2.5, -1.0, 0.0, 0.7, 2.0] {
        assert!((durrleman_g(&p, k) - durrleman_g_exact(&p, k)).abs() < 1e-5);
    }
}

#[test]
fn call_convexity_factorises_through_g() {
    let p = SsviParams { theta: 0.09, rho: -0.4, lambda: 1.5 };
    let f = S0 * (R * T).exp();
    let call = |k: f64| {
        let w = ssvi_w((k / f).ln(), &p);
        bs_analytic(S0, k, R, (w / T).sqrt(), T, OptionKind::Call).unwrap()
    };
    let n = Normal::standard();
    for &k in &[70.0, 90.0, 100.0, 115.0, 140.0] {
        let second = |h: f64| (call(k + h) - 2.0 * call(k) + call(k - h)) / (h * h);
        // Richardson extrapolation of the central second difference.
        let ckk = (4.0 * second(0.01) - second(0.02)) / 3.0;
        let lhs = (R * T).exp() * ckk;
        let x = (k / f).ln();
        let w = ssvi_w(x, &p);
        let d_plus = -x / w.sqrt() + 0.5 * w.sqrt();
        let rhs = f * n.pdf(d_plus) / (k * k * w.sqrt()) * durrleman_g_exact(&p, x);
        assert!((lhs / rhs - 1.0).abs() < 1e-6, "K = {k}: {lhs} vs {rhs}");
    }
}

#[test]
fn admissible_density_is_nonnegative_and_normalised() {
    let p = SsviParams { theta: 0.06, rho: -0.35, lambda: 3.0 };
    assert!(p.is_feasible(DEFAULT_EPS_CONS));
    let ks: Vec<f64> = (0..=12000).map(|i| -6.0 + 1e-3 * i as f64).collect();
    let d = implied_density(&p, &ks);
    assert!(d.min_density >= -1e-10);
    assert!(!d.butterfly);
    let mass: f64 = d.density.windows(2).map(|w| 0.5e-3 * (w[0] + w[1])).sum();
    assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
}

#[test]
fn flat_smile_recovers_the_lognormal_density() {
    let w = 0.0625;
    let ks: Vec<f64> = (0..=200).map(|i| -2.0 + 0.02 * i as f64).collect();
    let d = density_from_total_variance(|_| w, &ks);
    let n = Normal::new(-0.5 * w, w.sqrt()).unwrap();
    for (k, q) in ks.iter().zip(&d.density) {
        assert!((q - n.pdf(*k)).abs() < 1e-6);
    }
}

#[test]
fn spline_through_sparse_noisy_quotes_shows_butterfly_arbitrage() {
    let p = SsviParams { theta: 0.05, rho: -0.3, lambda: 2.0 };
    let ks: Vec<f64> = (0..7).map(|i| -0.3 + 0.1 * i as f64).collect();
    let noise = [0.0, 0.004, -0.004, 0.004, -0.004, 0.004, 0.0];
    let ws: Vec<f64> = ks.iter().zip(noise).map(|(&k, e)| ssvi_w(k, &p) + e).collect();
    let spline = CubicSpline::new(ks, ws).unwrap();
    let grid: Vec<f64> = (0..=300).map(|i| -0.3 + 0.6 * i as f64 / 300.0).collect();
    let d = density_from_total_variance(|k| spline.eval(k), &grid);
    assert!(d.butterfly);
    assert!(d.min_density < 0.0);
}

#[test]
fn price_vol_price_round_trip() {
    for &(k, sigma, kind) in &[
        (60.0, 0.45, OptionKind::Call),
        (100.0, 0.2, OptionKind::Call),
        (140.0, 0.3, OptionKind::Put),
        (85.0, 0.12, OptionKind::Put),
    ] {
        let price = bs_analytic(S0, k, R, sigma, T, kind).unwrap();
        let iv = implied_vol(price, S0, k, R, T, kind).unwrap();
        let back = bs_analytic(S0, k, R, iv, T, kind).unwrap();
        assert!((back / price - 1.0).abs() < 1e-8);
    }
    assert!(implied_vol(S0 + 1.0, S0, 100.0, R, T, OptionKind::Call).is_err());
}

#[test]
fn atm_anchor_and_wing_slopes() {
    let p = SsviParams { theta: 0.2, rho: 0.4, lambda: 0.5 };
    assert_eq!(ssvi_w(0.0, &p), 0.2);
    let (left, right) = p.wing_slopes();
    assert!((left - 0.5 * p.theta_phi() * 0.6).abs() < 1e-15);
    assert!((right - 0.5 * p.theta_phi() * 1.4).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn constraints_rule_out_butterflies(
        log_theta in -7.0f64..1.0,
        rho in -0.99f64..0.99,
        log_lambda in -5.0f64..5.0,
    ) {
        let p = SsviParams { theta: log_theta.exp(), rho, lambda: log_lambda.exp() };
        prop_assume!(p.is_feasible(DEFAULT_EPS_CONS));
        let g = (0..=800)
            .map(|i| durrleman_g_exact(&p, -4.0 + 0.01 * i as f64))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(g >= -1e-9, "min g = {g}");
        prop_assert_eq!(ssvi_w(0.0, &p), p.theta);
    }
}

#[test]
fn finite_difference_minimum_of_g_is_nonnegative_for_a_fitted_slice() {
    let p = SsviParams { theta: 0.17, rho: -0.12, lambda: 1e-6 };
    assert!(min_g(&p, -3.0, 3.0, 601) >= -1e-9);
}

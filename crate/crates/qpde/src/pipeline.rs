//! End-to-end pricing drivers: assemble the PDE system, Schrödingerise and
//! evolve it, recover the price surface and compare it with the classical
//! baselines.
//!
//! The backward evolution over `[0, T]` may be split into `M` equal segments.
//! After each segment the postselected direction and the propagated norm are
//! re-encoded as a fresh warped state. A single segment is the plain scheme;
//! more segments keep the content carried by the large positive part of the
//! spectrum of `S1` from wrapping around the periodic `ξ` domain into the
//! postselection window.

use serde::{Deserialize, Serialize};

use crate::classical_baselines::{bs_analytic, expm_action, heston_semianalytic, implicit_euler, OptionKind};
use crate::error::{Error, Result};
use crate::fdgrid::{build_axis, Axis, TensorGrid};
use crate::payoffs::{sample_payoff, PayoffSpec};
use crate::pde_models::{
    assemble_bs1d, assemble_heston1d, augment_register_scaled, augment_scalar_scaled, auto_scale, AffineSystem,
    BsParams, HestonParams, HomogeneousSystem,
};
use crate::smile_toolkit::{
    fit_ssvi, implied_vol, min_g, ssvi_w, QuoteWeights, SmileSlice, SsviFit, SsviParams, DEFAULT_EPS_CONS,
};
use crate::schrodingerizer::{
    build_cutoff, hermitian_split, initial_state, lambda_bound, lambda_exact, recover, recover_norm,
    upper_spectral_bound, BlockPropagator, Contraction, CutoffProfile, XiGrid,
};

/// Which homogeneous augmentation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationMode {
    #[default]
    Scalar,
    Register,
}

/// Numerical settings of the Schrödingerised solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchrodingerSettings {
    /// `n_ξ`, so `N_ξ = 2^{n_ξ}`.
    pub n_xi: u32,
    pub eps_schr: f64,
    /// Fixed `ξ` half-width; `None` selects [`default_half_width`].
    pub half_width: Option<f64>,
    /// Fixed number of restart segments; `None` selects [`auto_segments`].
    pub segments: Option<usize>,
    /// Use the exact dense `λ` instead of the Gershgorin bound.
    pub exact_lambda: bool,
    pub contraction: Contraction,
    /// Tolerance of the unitary propagation.
    pub tol: f64,
    /// Largest system dimension propagated by dense per-block eigensolves.
    pub dense_limit: usize,
}

impl Default for SchrodingerSettings {
    fn default() -> Self {
        Self {
            n_xi: 10,
            eps_schr: 1e-4,
            half_width: None,
            segments: None,
            exact_lambda: false,
            contraction: Contraction::Weighted,
            tol: 1e-12,
            dense_limit: 1024,
        }
    }
}

/// `L = max(14, 2(λτ + ln(1/ε)))`.
///
/// The floor of 14 keeps the right tail `e^{−L}` of the cut-off profile below
/// `10⁻⁶` of its peak, as required for the periodic `ξ` domain.
pub fn default_half_width(lambda_tau: f64, eps_schr: f64) -> f64 {
    (2.0 * (lambda_tau + (1.0 / eps_schr).ln())).max(14.0)
}

/// Smallest segment count `M` with `(μ + λ)τ + 2 ln(1/ε) + 4 ≤ 2L(τ)`, `τ = T/M`.
///
/// `μ` bounds the largest eigenvalue of `S1`; the left-moving content of the
/// warped state travels at most `μτ` per segment and must not wrap around the
/// periodic domain into the retained window.
pub fn auto_segments(mu: f64, lambda: f64, t: f64, eps_schr: f64, half_width: Option<f64>) -> usize {
    let log_eps = (1.0 / eps_schr).ln();
    for m in 1..=4096usize {
        let tau = t / m as f64;
        let l = half_width.unwrap_or_else(|| default_half_width(lambda * tau, eps_schr));
        if (mu + lambda) * tau + 2.0 * log_eps + 4.0 <= 2.0 * l {
            return m;
        }
    }
    4096
}

/// Result of a Schrödingerised backward solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchrodingerSolution {
    /// Reconstructed `w(0) = direction · norm`.
    pub w0: Vec<f64>,
    pub direction: Vec<f64>,
    /// Propagated `‖w(0)‖` from the postselection probabilities.
    pub norm: f64,
    /// Postselection probability of each segment.
    pub p_post: Vec<f64>,
    pub segments: usize,
    pub lambda: f64,
    pub mu: f64,
    pub half_width: f64,
    pub xi_qubits: u32,
    pub system_qubits: u32,
}

impl SchrodingerSolution {
    /// Total simulated qubits (`ξ` register plus system register).
    pub fn qubits(&self) -> u32 {
        self.xi_qubits + self.system_qubits
    }
}

/// Reusable Schrödingerised propagator for one generator `S` and horizon `T`.
pub struct SchrodingerSolver {
    settings: SchrodingerSettings,
    xi: XiGrid,
    profile: CutoffProfile,
    propagator: BlockPropagator,
    lambda: f64,
    mu: f64,
    segments: usize,
    tau: f64,
    dim: usize,
}

impl SchrodingerSolver {
    pub fn new(s: &crate::sparse::SparseOperator, t: f64, settings: &SchrodingerSettings) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::invalid("evolution horizon must be positive"));
        }
        let (s1, s2) = hermitian_split(s);
        let lambda = if settings.exact_lambda { lambda_exact(&s1)? } else { lambda_bound(&s1) };
        let mu = upper_spectral_bound(&s1);
        let segments = match settings.segments {
            Some(0) => return Err(Error::invalid("segment count must be at least 1")),
            Some(m) => m,
            None => auto_segments(mu, lambda, t, settings.eps_schr, settings.half_width),
        };
        let tau = t / segments as f64;
        let l = settings
            .half_width
            .unwrap_or_else(|| default_half_width(lambda * tau, settings.eps_schr));
        let xi = XiGrid::new(l, settings.n_xi)?;
        let profile = build_cutoff(settings.eps_schr, &xi)?;
        let propagator = BlockPropagator::new(&s1, &s2, &xi, settings.dense_limit)?;
        Ok(Self {
            settings: settings.clone(),
            xi,
            profile,
            propagator,
            lambda,
            mu,
            segments,
            tau,
            dim: s.dim_rows(),
        })
    }

    pub fn xi(&self) -> &XiGrid {
        &self.xi
    }

    pub fn profile(&self) -> &CutoffProfile {
        &self.profile
    }

    /// Backward solve from terminal data `w(T)`.
    pub fn solve(&self, terminal: &[f64]) -> Result<SchrodingerSolution> {
        if terminal.len() != self.dim {
            return Err(Error::invalid("terminal vector does not match the generator"));
        }
        let mut norm = terminal.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut w = terminal.to_vec();
        let mut direction = Vec::new();
        let mut p_post = Vec::with_capacity(self.segments);
        for _ in 0..self.segments {
            let psi = initial_state(&self.profile, &w)?;
            let psi0 = self.propagator.apply(&psi, self.tau, self.settings.tol)?;
            let rec = recover(&psi0, &self.xi, self.lambda, self.tau, self.settings.contraction)?;
            norm = recover_norm(rec.p_post, norm, self.lambda, &self.profile, &self.xi, self.tau)?;
            w = rec.direction.iter().map(|d| d * norm).collect();
            p_post.push(rec.p_post);
            direction = rec.direction;
        }
        Ok(SchrodingerSolution {
            w0: w,
            direction,
            norm,
            p_post,
            segments: self.segments,
            lambda: self.lambda,
            mu: self.mu,
            half_width: self.xi.half_width,
            xi_qubits: self.xi.qubits(),
            system_qubits: usize::BITS - (self.dim.max(2) - 1).leading_zeros(),
        })
    }
}

/// One-shot Schrödingerised backward solve of a homogeneous system.
pub fn schrodinger_solve(hs: &HomogeneousSystem, t: f64, settings: &SchrodingerSettings) -> Result<SchrodingerSolution> {
    SchrodingerSolver::new(&hs.s, t, settings)?.solve(&hs.terminal)
}

fn augment(sys: &AffineSystem, vt: &[f64], mode: AugmentationMode, scale: f64) -> Result<HomogeneousSystem> {
    match mode {
        AugmentationMode::Scalar => augment_scalar_scaled(sys, vt, scale),
        AugmentationMode::Register => augment_register_scaled(sys, vt, scale),
    }
}

// ---------------------------------------------------------------------------
// One-asset Black–Scholes
// ---------------------------------------------------------------------------

/// One-asset Black–Scholes experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bs1dSetup {
    pub rate: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub strike: f64,
    pub s_max: f64,
    /// Price qubits `n`, `N = 2^n`.
    pub n: u32,
    /// Implicit-Euler steps; `None` gives `T·N²`.
    #[serde(default)]
    pub fd_steps: Option<usize>,
    #[serde(default)]
    pub augmentation: AugmentationMode,
    #[serde(default)]
    pub schrodinger: SchrodingerSettings,
}

impl Bs1dSetup {
    /// The reference one-asset configuration (σ = 0.05, r = 0.03, K = 60,
    /// `S_max = 120`, `N = 64`, `N_ξ = 1024`).
    pub fn reference() -> Self {
        Self {
            rate: 0.03,
            sigma: 0.05,
            maturity: 1.0,
            strike: 60.0,
            s_max: 120.0,
            n: 6,
            fd_steps: None,
            augmentation: AugmentationMode::Scalar,
            schrodinger: SchrodingerSettings::default(),
        }
    }
}

/// Price curves of the one-asset experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bs1dReport {
    pub s: Vec<f64>,
    pub v_quantum: Vec<f64>,
    pub v_fd: Vec<f64>,
    pub v_expm: Vec<f64>,
    pub v_analytic: Vec<f64>,
    pub solution: SchrodingerSolution,
    pub fd_steps: usize,
}

pub fn run_bs1d(setup: &Bs1dSetup) -> Result<Bs1dReport> {
    let params = BsParams::single(setup.rate, setup.maturity, setup.sigma);
    let axis = build_axis("S", 0.0, setup.s_max, setup.n)?;
    let sys = assemble_bs1d(&params, &axis, setup.strike)?;
    let grid = TensorGrid::new(vec![axis.clone()])?;
    let vt = sample_payoff(&PayoffSpec::call(setup.strike), &grid)?;
    let hs = augment(&sys, &vt, setup.augmentation, auto_scale(&sys, &vt))?;
    let t = setup.maturity;
    let n = axis.points;
    let fd_steps = setup
        .fd_steps
        .unwrap_or_else(|| ((t * (n * n) as f64).round() as usize).max(1));
    let solution = schrodinger_solve(&hs, t, &setup.schrodinger)?;
    let fd = implicit_euler(&hs, t, fd_steps)?;
    let ex = expm_action(&hs, t, 1e-13)?;
    let s = axis.coords();
    let v_analytic = s
        .iter()
        .map(|&x| bs_analytic(x, setup.strike, setup.rate, setup.sigma, t, OptionKind::Call))
        .collect::<Result<Vec<_>>>()?;
    Ok(Bs1dReport {
        v_quantum: solution.w0[..n].to_vec(),
        v_fd: fd[..n].to_vec(),
        v_expm: ex[..n].to_vec(),
        v_analytic,
        s,
        solution,
        fd_steps,
    })
}

// ---------------------------------------------------------------------------
// One-asset Heston
// ---------------------------------------------------------------------------

/// One-asset Heston experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonSetup {
    pub rate: f64,
    pub maturity: f64,
    pub kappa: f64,
    pub theta: f64,
    pub vol_of_vol: f64,
    pub rho: f64,
    pub s_max: f64,
    #[serde(default)]
    pub v_min: f64,
    pub v_max: f64,
    pub n_s: u32,
    pub n_v: u32,
    pub strike: f64,
    /// Marked spot and variance at which point prices are reported.
    pub s0: f64,
    pub v0: f64,
    #[serde(default)]
    pub augmentation: AugmentationMode,
    #[serde(default = "heston_default_schrodinger")]
    pub schrodinger: SchrodingerSettings,
}

fn heston_default_schrodinger() -> SchrodingerSettings {
    SchrodingerSettings {
        n_xi: 9,
        eps_schr: 1e-3,
        ..SchrodingerSettings::default()
    }
}

impl HestonSetup {
    /// The reference one-asset Heston configuration (κ = 2, θ = 0.12,
    /// σ_v = 0.4, ρ = −0.1, r = 0.03, `S_max = 180`, `v ∈ [0, 0.45]`,
    /// `N_S = 16`, `N_v = 8`, `N_ξ = 512`, K = 75 marked at (70, 0.25)).
    pub fn reference() -> Self {
        Self {
            rate: 0.03,
            maturity: 1.0,
            kappa: 2.0,
            theta: 0.12,
            vol_of_vol: 0.4,
            rho: -0.1,
            s_max: 180.0,
            v_min: 0.0,
            v_max: 0.45,
            n_s: 4,
            n_v: 3,
            strike: 75.0,
            s0: 70.0,
            v0: 0.25,
            augmentation: AugmentationMode::Scalar,
            schrodinger: heston_default_schrodinger(),
        }
    }

    pub fn params(&self) -> HestonParams {
        HestonParams::single(self.rate, self.maturity, self.kappa, self.theta, self.vol_of_vol, self.rho)
    }

    pub fn axes(&self) -> Result<(Axis, Axis)> {
        Ok((
            build_axis("S", 0.0, self.s_max, self.n_s)?,
            build_axis("v", self.v_min, self.v_max, self.n_v)?,
        ))
    }
}

/// Four-point (cubic) Lagrange interpolation of a surface stored with the
/// second axis fastest.
pub fn interpolate_surface(xs: &[f64], ys: &[f64], values: &[f64], x: f64, y: f64) -> f64 {
    fn stencil(nodes: &[f64], x: f64) -> (usize, [f64; 4]) {
        let n = nodes.len();
        let k = nodes.partition_point(|&v| v <= x).saturating_sub(1);
        let start = k.saturating_sub(1).min(n.saturating_sub(4));
        let m = n.min(4);
        let mut w = [0.0; 4];
        for i in 0..m {
            let mut l = 1.0;
            for j in 0..m {
                if i != j {
                    l *= (x - nodes[start + j]) / (nodes[start + i] - nodes[start + j]);
                }
            }
            w[i] = l;
        }
        (start, w)
    }
    let (si, wx) = stencil(xs, x);
    let (sj, wy) = stencil(ys, y);
    let ny = ys.len();
    let mut acc = 0.0;
    for i in 0..xs.len().min(4) {
        for j in 0..ny.min(4) {
            acc += wx[i] * wy[j] * values[(si + i) * ny + sj + j];
        }
    }
    acc
}

/// Prices at the marked point and at the grid nodes surrounding it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkedRegion {
    /// Cubic interpolants at `(s0, v0)`.
    pub quantum: f64,
    pub expm: f64,
    pub semi_analytic: f64,
    /// `(S, v, V_quantum, V_semi_analytic)` at the 2×2 enclosing nodes.
    pub nodes: Vec<(f64, f64, f64, f64)>,
}

impl MarkedRegion {
    /// Largest absolute quantum-vs-semi-analytic gap over the nodes and the point.
    pub fn max_error(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| (n.2 - n.3).abs())
            .fold((self.quantum - self.semi_analytic).abs(), f64::max)
    }
}

/// Heston price surfaces over the `(S, v)` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HestonSurface {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    /// Values with `v` fastest.
    pub v_quantum: Vec<f64>,
    pub v_expm: Vec<f64>,
    pub v_semi_analytic: Vec<f64>,
    pub region: MarkedRegion,
    pub solution: SchrodingerSolution,
}

fn heston_system(setup: &HestonSetup, strike: f64) -> Result<(AffineSystem, Vec<f64>)> {
    let (sa, va) = setup.axes()?;
    let sys = assemble_heston1d(&setup.params(), &sa, &va)?;
    let vt = sample_payoff(&PayoffSpec::call(strike), &sys.grid)?;
    Ok((sys, vt))
}

fn semi_analytic_at(p: &HestonParams, s: f64, v: f64, k: f64, t: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(heston_semianalytic(p, s, v, k, t)?.call)
}

pub fn run_heston_surface(setup: &HestonSetup) -> Result<HestonSurface> {
    let (sys, vt) = heston_system(setup, setup.strike)?;
    let hs = augment(&sys, &vt, setup.augmentation, auto_scale(&sys, &vt))?;
    let t = setup.maturity;
    let solution = schrodinger_solve(&hs, t, &setup.schrodinger)?;
    let ex = expm_action(&hs, t, 1e-13)?;
    let n = sys.dim();
    let s = sys.grid.axes[0].coords();
    let v = sys.grid.axes[1].coords();
    let p = setup.params();
    let mut v_sa = Vec::with_capacity(n);
    for &si in &s {
        for &vi in &v {
            v_sa.push(semi_analytic_at(&p, si, vi, setup.strike, t)?);
        }
    }
    let vq = solution.w0[..n].to_vec();
    let ve = ex[..n].to_vec();
    let region = marked_region(setup, &s, &v, &vq, &ve, setup.strike)?;
    Ok(HestonSurface {
        s,
        v,
        v_quantum: vq,
        v_expm: ve,
        v_semi_analytic: v_sa,
        region,
        solution,
    })
}

fn marked_region(setup: &HestonSetup, s: &[f64], v: &[f64], vq: &[f64], ve: &[f64], k: f64) -> Result<MarkedRegion> {
    let p = setup.params();
    let t = setup.maturity;
    let is = s.partition_point(|&x| x <= setup.s0).saturating_sub(1).min(s.len() - 2);
    let iv = v.partition_point(|&x| x <= setup.v0).saturating_sub(1).min(v.len() - 2);
    let mut nodes = Vec::with_capacity(4);
    for a in is..is + 2 {
        for b in iv..iv + 2 {
            nodes.push((s[a], v[b], vq[a * v.len() + b], semi_analytic_at(&p, s[a], v[b], k, t)?));
        }
    }
    Ok(MarkedRegion {
        quantum: interpolate_surface(s, v, vq, setup.s0, setup.v0),
        expm: interpolate_surface(s, v, ve, setup.s0, setup.v0),
        semi_analytic: semi_analytic_at(&p, setup.s0, setup.v0, k, t)?,
        nodes,
    })
}

/// One strike of a Heston scan, priced at the marked point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub strike: f64,
    pub quantum: f64,
    pub expm: f64,
    pub semi_analytic: f64,
}

/// Prices the marked point for each strike. The augmentation scale is shared
/// across strikes, so a single propagator serves the whole scan.
pub fn run_heston_scan(setup: &HestonSetup, strikes: &[f64]) -> Result<Vec<ScanRow>> {
    if strikes.is_empty() {
        return Err(Error::invalid("strike scan needs at least one strike"));
    }
    let mut systems = Vec::with_capacity(strikes.len());
    let mut scale: f64 = 1.0;
    for &k in strikes {
        let (sys, vt) = heston_system(setup, k)?;
        scale = scale.max(auto_scale(&sys, &vt));
        systems.push((sys, vt));
    }
    let t = setup.maturity;
    let first = augment(&systems[0].0, &systems[0].1, setup.augmentation, scale)?;
    let solver = SchrodingerSolver::new(&first.s, t, &setup.schrodinger)?;
    let mut rows = Vec::with_capacity(strikes.len());
    for (&k, (sys, vt)) in strikes.iter().zip(&systems) {
        let hs = augment(sys, vt, setup.augmentation, scale)?;
        let sol = solver.solve(&hs.terminal)?;
        let ex = expm_action(&hs, t, 1e-13)?;
        let n = sys.dim();
        let s = sys.grid.axes[0].coords();
        let v = sys.grid.axes[1].coords();
        let region = marked_region(setup, &s, &v, &sol.w0[..n], &ex[..n], k)?;
        rows.push(ScanRow {
            strike: k,
            quantum: region.quantum,
            expm: region.expm,
            semi_analytic: region.semi_analytic,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Smile
// ---------------------------------------------------------------------------

/// Strike scan inverted to implied volatilities and fitted by SSVI, per pricing method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmileSetup {
    pub heston: HestonSetup,
    pub strikes: Vec<f64>,
    #[serde(default)]
    pub weights: QuoteWeights,
    #[serde(default = "default_eps_cons")]
    pub eps_cons: f64,
    /// Log-moneyness range and resolution of the reported fitted curves
    /// and of the `g` minimum.
    #[serde(default = "default_k_range")]
    pub k_range: (f64, f64),
    #[serde(default = "default_k_points")]
    pub k_points: usize,
}

fn default_eps_cons() -> f64 {
    DEFAULT_EPS_CONS
}

fn default_k_range() -> (f64, f64) {
    (-3.0, 3.0)
}

fn default_k_points() -> usize {
    601
}

impl SmileSetup {
    /// Reference Heston configuration with strikes spread over `[50, 115]`.
    pub fn reference() -> Self {
        Self {
            heston: HestonSetup::reference(),
            strikes: vec![50.0, 55.0, 65.0, 70.0, 75.0, 80.0, 90.0, 100.0, 110.0, 115.0],
            weights: QuoteWeights::Uniform,
            eps_cons: DEFAULT_EPS_CONS,
            k_range: default_k_range(),
            k_points: default_k_points(),
        }
    }
}

/// Implied volatilities and SSVI fit of one pricing method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileFit {
    pub method: String,
    pub prices: Vec<f64>,
    pub implied_vols: Vec<f64>,
    pub fit: SsviFit,
    /// Fitted volatilities `√(w(k_i)/T)` at the scanned strikes.
    pub fitted_vols: Vec<f64>,
    /// `min g` over the reporting `k` grid.
    pub g_min: f64,
    pub wing_slopes: (f64, f64),
}

/// Output of [`run_smile`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileReport {
    pub strikes: Vec<f64>,
    pub log_moneyness: Vec<f64>,
    pub quantum: SmileFit,
    pub semi_analytic: SmileFit,
    /// `100·|σ_q − σ_sa|/σ_sa` between the fitted volatilities at each strike.
    pub rel_error_pct: Vec<f64>,
    /// Reporting grid and both fitted vol curves on it.
    pub k_grid: Vec<f64>,
    pub curve_quantum: Vec<f64>,
    pub curve_semi_analytic: Vec<f64>,
}

/// Fits SSVI to prices of one method at the setup strikes.
pub fn fit_smile(setup: &SmileSetup, method: &str, prices: &[f64]) -> Result<SmileFit> {
    let h = &setup.heston;
    let t = h.maturity;
    let vols = setup
        .strikes
        .iter()
        .zip(prices)
        .map(|(&k, &p)| implied_vol(p, h.s0, k, h.rate, t, OptionKind::Call))
        .collect::<Result<Vec<_>>>()?;
    let slice = SmileSlice::new(h.s0, h.rate, t, setup.strikes.clone(), vols.clone())?;
    let fit = fit_ssvi(&slice, setup.weights, setup.eps_cons)?;
    let fitted_vols = slice
        .log_moneyness()
        .iter()
        .map(|&k| (ssvi_w(k, &fit.params) / t).sqrt())
        .collect();
    let (lo, hi) = setup.k_range;
    Ok(SmileFit {
        method: method.to_string(),
        prices: prices.to_vec(),
        implied_vols: vols,
        g_min: min_g(&fit.params, lo, hi, setup.k_points.max(2)),
        wing_slopes: fit.params.wing_slopes(),
        fit,
        fitted_vols,
    })
}

/// Heston strike scan → implied vols → SSVI fits for the quantum and
/// semi-analytic prices, with pointwise relative errors in percent.
pub fn run_smile(setup: &SmileSetup) -> Result<SmileReport> {
    if setup.strikes.len() < 3 {
        return Err(Error::invalid("smile needs at least three strikes"));
    }
    let rows = run_heston_scan(&setup.heston, &setup.strikes)?;
    let q: Vec<f64> = rows.iter().map(|r| r.quantum).collect();
    let sa: Vec<f64> = rows.iter().map(|r| r.semi_analytic).collect();
    let quantum = fit_smile(setup, "quantum", &q)?;
    let semi_analytic = fit_smile(setup, "semi_analytic", &sa)?;
    let rel_error_pct = quantum
        .fitted_vols
        .iter()
        .zip(&semi_analytic.fitted_vols)
        .map(|(a, b)| 100.0 * (a - b).abs() / b)
        .collect();
    let (lo, hi) = setup.k_range;
    let np = setup.k_points.max(2);
    let k_grid: Vec<f64> = (0..np).map(|i| lo + (hi - lo) * i as f64 / (np - 1) as f64).collect();
    let t = setup.heston.maturity;
    let curve = |p: &SsviParams| k_grid.iter().map(|&k| (ssvi_w(k, p) / t).sqrt()).collect::<Vec<_>>();
    let forward = setup.heston.s0 * (setup.heston.rate * t).exp();
    Ok(SmileReport {
        strikes: setup.strikes.clone(),
        log_moneyness: setup.strikes.iter().map(|k| (k / forward).ln()).collect(),
        curve_quantum: curve(&quantum.fit.params),
        curve_semi_analytic: curve(&semi_analytic.fit.params),
        k_grid,
        quantum,
        semi_analytic,
        rel_error_pct,
    })
}

// ---------------------------------------------------------------------------
// Convergence sweeps
// ---------------------------------------------------------------------------

/// Error against resolution with the fitted log-log (or log₂) slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub name: String,
    /// Label of the swept quantity.
    pub parameter: String,
    pub resolution: Vec<f64>,
    pub error: Vec<f64>,
    /// `d log(error) / d log(resolution)`.
    pub slope: f64,
}

/// Max interior error of the central second-derivative stencil applied to
/// `f(x) = e^{sin x}` on `[0, 2]`, for `N = 2ⁿ` points.
pub fn d2_stencil_sweep(ns: &[u32]) -> Result<Sweep> {
    let f = |x: f64| x.sin().exp();
    let f2 = |x: f64| x.sin().exp() * (x.cos().powi(2) - x.sin());
    let mut res = Vec::with_capacity(ns.len());
    let mut err = Vec::with_capacity(ns.len());
    for &n in ns {
        let axis = build_axis("x", 0.0, 2.0, n)?;
        let op = crate::fdgrid::d2_central(&axis)?;
        let x = axis.coords();
        let y = op.matvec(&x.iter().map(|&v| f(v)).collect::<Vec<_>>());
        let e = (1..x.len() - 1).map(|k| (y[k] - f2(x[k])).abs()).fold(0.0, f64::max);
        res.push(axis.points as f64);
        err.push(e);
    }
    Ok(Sweep {
        name: "d2_stencil".into(),
        parameter: "N".into(),
        slope: crate::stats::loglog_slope(&res, &err),
        resolution: res,
        error: err,
    })
}

fn bs1d_homogeneous(setup: &Bs1dSetup) -> Result<(HomogeneousSystem, usize)> {
    let params = BsParams::single(setup.rate, setup.maturity, setup.sigma);
    let axis = build_axis("S", 0.0, setup.s_max, setup.n)?;
    let sys = assemble_bs1d(&params, &axis, setup.strike)?;
    let grid = TensorGrid::new(vec![axis.clone()])?;
    let vt = sample_payoff(&PayoffSpec::call(setup.strike), &grid)?;
    let hs = augment(&sys, &vt, setup.augmentation, auto_scale(&sys, &vt))?;
    Ok((hs, axis.points))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Max gap between implicit Euler with `steps` steps and the exact action
/// `e^{−ST}w(T)` on the price block of a one-asset Black–Scholes system.
pub fn euler_sweep(setup: &Bs1dSetup, steps: &[usize]) -> Result<Sweep> {
    let (hs, n) = bs1d_homogeneous(setup)?;
    let t = setup.maturity;
    let ex = expm_action(&hs, t, 1e-14)?;
    let mut err = Vec::with_capacity(steps.len());
    for &m in steps {
        let fd = implicit_euler(&hs, t, m)?;
        err.push(max_gap(&fd[..n], &ex[..n]));
    }
    let res: Vec<f64> = steps.iter().map(|&m| m as f64).collect();
    Ok(Sweep {
        name: "implicit_euler_vs_expm".into(),
        parameter: "steps".into(),
        slope: crate::stats::loglog_slope(&res, &err),
        resolution: res,
        error: err,
    })
}

/// Max gap between the Schrödingerised and the exact solution on the price
/// block for each `n_ξ`; the slope is taken against `N_ξ`.
pub fn nxi_sweep(setup: &Bs1dSetup, n_xis: &[u32]) -> Result<Sweep> {
    let (hs, n) = bs1d_homogeneous(setup)?;
    let t = setup.maturity;
    let ex = expm_action(&hs, t, 1e-14)?;
    let mut err = Vec::with_capacity(n_xis.len());
    for &q in n_xis {
        let settings = SchrodingerSettings { n_xi: q, ..setup.schrodinger.clone() };
        let sol = schrodinger_solve(&hs, t, &settings)?;
        err.push(max_gap(&sol.w0[..n], &ex[..n]));
    }
    let res: Vec<f64> = n_xis.iter().map(|&q| 2f64.powi(q as i32)).collect();
    Ok(Sweep {
        name: "schrodingerisation_vs_expm".into(),
        parameter: "N_xi".into(),
        slope: crate::stats::loglog_slope(&res, &err),
        resolution: res,
        error: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_width_floor_and_growth() {
        assert_eq!(default_half_width(0.0, 0.1), 14.0);
        assert!((default_half_width(3.0, 1e-4) - 2.0 * (3.0 + 1e4f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn auto_segments_is_one_for_mild_spectra() {
        assert_eq!(auto_segments(1.0, 0.5, 1.0, 1e-3, None), 1);
        let m = auto_segments(400.0, 27.0, 1.0, 1e-3, None);
        assert!(m > 1);
        let tau = 1.0 / m as f64;
        assert!((427.0) * tau + 2.0 * 1e3f64.ln() + 4.0 <= 2.0 * default_half_width(27.0 * tau, 1e-3));
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 1.5).collect();
        let ys: Vec<f64> = (0..6).map(|i| i as f64 * 0.2).collect();
        let f = |x: f64, y: f64| x * x * x - 2.0 * x * y + y * y * y;
        let vals: Vec<f64> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| f(x, y))).collect();
        for &(x, y) in &[(3.3, 0.45), (0.2, 0.05), (10.4, 0.95)] {
            assert!((interpolate_surface(&xs, &ys, &vals, x, y) - f(x, y)).abs() < 1e-10);
        }
    }
}

//! Asymptotic gate-cost formulas for the quantum pricing pipeline and its
//! classical competitors, evaluated under the unit-constant convention.
//!
//! Every `O(·)` constant is set to one and all logarithms are base two. The
//! numbers are scaling indicators, not physical resource counts; every report
//! carries [`BANNER`] to say so. Suppressed polylogarithmic factors are
//! dropped; where a formula only fixes them as `poly(n)` the report flags that
//! instead of inventing a value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disclaimer attached to every report.
pub const BANNER: &str = "unit-constant convention; asymptotic, not physical";

/// Pricing model whose cost is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    Bs1d,
    BsMulti,
    Heston1d,
    HestonMulti,
}

impl CostModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bs1d => "bs1d",
            Self::BsMulti => "bs_multi",
            Self::Heston1d => "heston1d",
            Self::HestonMulti => "heston_multi",
        }
    }

    fn is_heston(self) -> bool {
        matches!(self, Self::Heston1d | Self::HestonMulti)
    }

    /// Number of spatial variables `s` of the pricing PDE with `d` assets.
    pub fn spatial_dims(self, d: u32) -> u32 {
        if self.is_heston() {
            2 * d
        } else {
            d
        }
    }
}

/// Brownian correlation structure of the Monte Carlo competitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McStructure {
    Dense,
    /// `q`-factor correlation.
    Factor(u32),
    Diagonal,
}

/// Monte Carlo scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McVariant {
    /// Weak-order-one time stepping, `ε⁻³`.
    Euler,
    /// Exact terminal lognormal sampling, `ε⁻²`.
    ExactBs,
    /// Euler-based multilevel Monte Carlo, `ε⁻² polylog(1/ε)`.
    Mlmc,
}

/// One cost query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceQuery {
    pub model: CostModel,
    /// Number of assets.
    pub d: u32,
    /// Qubits per spatial direction (`N = 2ⁿ`).
    pub n: u32,
    /// Qubits of the auxiliary Schrödingerisation register.
    pub n_xi: u32,
    /// Evolution time in years.
    pub t: f64,
    /// Polynomial degree of the local-volatility approximation.
    #[serde(default = "one_u32")]
    pub q_sigma: u32,
    /// Synthesis accuracy of the rotation gates.
    #[serde(default = "default_eps_rot")]
    pub eps_rot: f64,
    #[serde(default = "default_structure")]
    pub mc_structure: McStructure,
    #[serde(default = "default_variant")]
    pub mc_variant: McVariant,
}

fn one_u32() -> u32 {
    1
}

fn default_eps_rot() -> f64 {
    1e-3
}

fn default_structure() -> McStructure {
    McStructure::Dense
}

fn default_variant() -> McVariant {
    McVariant::Euler
}

impl ResourceQuery {
    pub fn new(model: CostModel, d: u32, n: u32, n_xi: u32, t: f64) -> Self {
        Self {
            model,
            d,
            n,
            n_xi,
            t,
            q_sigma: 1,
            eps_rot: default_eps_rot(),
            mc_structure: default_structure(),
            mc_variant: default_variant(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_xi == 0 || self.q_sigma == 0 {
            return Err(Error::invalid("d, n_xi and q_sigma must be at least one"));
        }
        if matches!(self.model, CostModel::Bs1d | CostModel::Heston1d) && self.d != 1 {
            return Err(Error::invalid("one-asset models require d = 1"));
        }
        if !(self.t > 0.0) || !(self.eps_rot > 0.0 && self.eps_rot < 1.0) {
            return Err(Error::invalid("need T > 0 and eps_rot in (0, 1)"));
        }
        if let McStructure::Factor(0) = self.mc_structure {
            return Err(Error::invalid("factor correlation needs q ≥ 1"));
        }
        Ok(())
    }
}

/// `x·log₂x`, zero at `x = 0`.
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Per-stage costs of one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub model: CostModel,
    pub d: u32,
    pub n: u32,
    pub n_xi: u32,
    pub state_prep: f64,
    pub evolution: f64,
    pub readout_factor: f64,
    /// `(state_prep + evolution) · readout_factor`.
    pub end_to_end: f64,
    /// Leading Clifford+T term for `end_to_end` rotations at `eps_rot`.
    pub t_count: f64,
    pub classical_pde: f64,
    pub mc_cost: f64,
    /// True when the Monte Carlo figure omits a `poly(n)` factor.
    pub mc_polylog_dropped: bool,
    pub advantage_ratio: f64,
    pub banner: &'static str,
}

/// Quantum stage costs with every constant equal to one.
///
/// One-asset models use the one-dimensional brackets
/// `(n log n + n_ξ log n_ξ) + 2^{2n}T(X + n_ξ log n_ξ)` with `X = Q_σ n log n`
/// (Black–Scholes) or `n log n` (Heston); multi-asset models use
/// `(d³n + d²n log n) + dT·2^{2n}[X + n_ξ log n_ξ + d⁴n]` with
/// `X = dQ_σ n log n` or `dn log n`. The readout factor is `2^{nd/2}`
/// (Black–Scholes) or `2^{nd}` (Heston).
pub fn quantum_cost(q: &ResourceQuery) -> Result<ResourceReport> {
    q.validate()?;
    let d = q.d as f64;
    let n = q.n as f64;
    let nlogn = xlogx(n);
    let xi = xlogx(q.n_xi as f64);
    let grid = 2f64.powf(2.0 * n);
    let (prep, evol) = match q.model {
        CostModel::Bs1d => (nlogn + xi, grid * q.t * (q.q_sigma as f64 * nlogn + xi)),
        CostModel::Heston1d => (nlogn + xi, grid * q.t * (nlogn + xi)),
        CostModel::BsMulti => (
            d.powi(3) * n + d * d * nlogn,
            d * q.t * grid * (d * q.q_sigma as f64 * nlogn + xi + d.powi(4) * n),
        ),
        CostModel::HestonMulti => (
            d.powi(3) * n + d * d * nlogn,
            d * q.t * grid * (d * nlogn + xi + d.powi(4) * n),
        ),
    };
    let readout = readout_factor(q.model, q.d, q.n);
    let end_to_end = (prep + evol) * readout;
    let t_count = if end_to_end > 0.0 {
        clifford_t(end_to_end, q.eps_rot)?.leading
    } else {
        0.0
    };
    let s = q.model.spatial_dims(q.d);
    let (mc, polylog) = mc_cost(q)?;
    Ok(ResourceReport {
        model: q.model,
        d: q.d,
        n: q.n,
        n_xi: q.n_xi,
        state_prep: prep,
        evolution: evol,
        readout_factor: readout,
        end_to_end,
        t_count,
        classical_pde: classical_pde_cost(s, q.n, q.d),
        mc_cost: mc,
        mc_polylog_dropped: polylog,
        advantage_ratio: advantage_ratio(q.model, q.d, q.n),
        banner: BANNER,
    })
}

/// Single-point readout overhead `2^{nd/2}` (Black–Scholes) or `2^{nd}` (Heston).
pub fn readout_factor(model: CostModel, d: u32, n: u32) -> f64 {
    let e = (n as f64) * (d as f64);
    if model.is_heston() {
        2f64.powf(e)
    } else {
        2f64.powf(0.5 * e)
    }
}

/// Leading classical finite-difference cost `d²·N^{s+2}` for `s` spatial
/// variables, `N = 2ⁿ` points per variable and `d` assets.
pub fn classical_pde_cost(s: u32, n: u32, d: u32) -> f64 {
    (d as f64).powi(2) * 2f64.powf(n as f64 * (s as f64 + 2.0))
}

/// Classical-to-quantum ratio of the leading grid-size terms:
/// `N^{s+2} / (N²·readout)`, i.e. `2^{nd/2}` for Black–Scholes and `2^{nd}`
/// for Heston, with all `poly(d, n)` factors suppressed.
pub fn advantage_ratio(model: CostModel, d: u32, n: u32) -> f64 {
    let s = model.spatial_dims(d) as f64;
    let n = n as f64;
    2f64.powf(n * (s + 2.0)) / (2f64.powf(2.0 * n) * readout_factor(model, d, n as u32))
}

/// Clifford+T synthesis estimate for `C` rotations at total accuracy `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TCount {
    /// `4C·log₂(C/ε)`.
    pub leading: f64,
    /// `C·log₂log₂(C/ε)` (unit constant).
    pub second: f64,
}

pub fn clifford_t(rotations: f64, eps: f64) -> Result<TCount> {
    if !(rotations > 0.0 && eps > 0.0) {
        return Err(Error::invalid("need a positive rotation count and accuracy"));
    }
    let l = (rotations / eps).log2();
    if !(l >= 1.0) {
        return Err(Error::invalid("C/ε must be at least 2"));
    }
    Ok(TCount {
        leading: 4.0 * rotations * l,
        second: rotations * l.log2(),
    })
}

/// Inputs of the Hamiltonian-simulation cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamsimQuery {
    /// Number of spatial directions entering the sparsity `𝔰 = d`.
    pub d: u32,
    pub n: u32,
    pub n_xi: u32,
    pub t: f64,
    pub q_sigma: u32,
    /// Simulation accuracy.
    pub eps: f64,
    /// Largest volatility; `‖H‖_max` defaults to `σ_max²·2^{2n}`.
    #[serde(default = "one_f64")]
    pub sigma_max: f64,
    /// Measured `‖H‖_max` of an assembled operator, when available.
    #[serde(default)]
    pub h_max: Option<f64>,
    /// Include the `log(1/ε)/log log(1/ε)` additive correction.
    #[serde(default = "yes")]
    pub log_correction: bool,
}

fn one_f64() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// `[𝔰‖H‖_max T + log(1/ε)/log log(1/ε)] × [dQ_σ n log n + n_ξ log n_ξ + dη𝔰n]`
/// with `𝔰 = d` and `η = d²`.
pub fn hamsim_cost(q: &HamsimQuery) -> Result<f64> {
    if q.d == 0 || !(q.t > 0.0) || !(q.eps > 0.0 && q.eps < 0.25) {
        return Err(Error::invalid("need d ≥ 1, T > 0 and eps in (0, 1/4)"));
    }
    let d = q.d as f64;
    let n = q.n as f64;
    let h = q.h_max.unwrap_or(q.sigma_max * q.sigma_max * 2f64.powf(2.0 * n));
    let l = (1.0 / q.eps).log2();
    let corr = if q.log_correction { l / l.log2() } else { 0.0 };
    let sparsity = d;
    let eta = d * d;
    Ok((sparsity * h * q.t + corr)
        * (d * q.q_sigma as f64 * xlogx(n) + xlogx(q.n_xi as f64) + d * eta * sparsity * n))
}

/// Payoff (or auxiliary profile) prepared by the state-preparation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepKind {
    Vanilla,
    Basket,
    Spread,
    BestOf,
    WorstOf,
    Cutoff,
}

/// Cost of one preparation attempt, its success probability scale and the
/// amplitude-amplification repetition factor `1/√F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrepCost {
    pub gates: f64,
    pub filling_ratio: f64,
    pub oaa_multiplier: f64,
}

pub fn prep_costs(kind: PrepKind, d: u32, n: u32) -> Result<PrepCost> {
    if d == 0 {
        return Err(Error::invalid("d must be at least one"));
    }
    let (d, n) = (d as f64, n as f64);
    let nlogn = xlogx(n);
    let (gates, f) = match kind {
        PrepKind::Vanilla | PrepKind::Cutoff => (nlogn, 1.0),
        PrepKind::Basket => (d * nlogn, 1.0),
        PrepKind::Spread => (d * nlogn, 1.0 / d),
        PrepKind::BestOf => (d * d * n + d * nlogn, 1.0),
        PrepKind::WorstOf => (d * d * n + d * nlogn, 1.0 / (d * d)),
    };
    Ok(PrepCost {
        gates,
        filling_ratio: f,
        oaa_multiplier: 1.0 / f.sqrt(),
    })
}

/// Monte Carlo cost at accuracy `ε = 2^{−2n}`: per-step cost `d²`, `dq` or `d`
/// times `2^{6n}` (Euler) or `2^{4n}` (exact terminal sampling, MLMC). The
/// flag is true for MLMC, whose `poly(n)` factor is dropped.
pub fn mc_cost(q: &ResourceQuery) -> Result<(f64, bool)> {
    let d = q.d as f64;
    let per_step = match q.mc_structure {
        McStructure::Dense => d * d,
        McStructure::Factor(k) => {
            if k == 0 {
                return Err(Error::invalid("factor correlation needs q ≥ 1"));
            }
            d * k as f64
        }
        McStructure::Diagonal => d,
    };
    let n = q.n as f64;
    Ok(match q.mc_variant {
        McVariant::Euler => (per_step * 2f64.powf(6.0 * n), false),
        McVariant::ExactBs => (per_step * 2f64.powf(4.0 * n), false),
        McVariant::Mlmc => (per_step * 2f64.powf(4.0 * n), true),
    })
}

/// Auxiliary-register size `max(1, ⌈log₂log₂(1/ε)⌉)`.
pub fn nxi_requirement(eps_schr: f64) -> Result<u32> {
    if !(eps_schr > 0.0 && eps_schr < 1.0) {
        return Err(Error::invalid("eps_schr must lie in (0, 1)"));
    }
    let l = (1.0 / eps_schr).log2();
    if l <= 2.0 {
        return Ok(1);
    }
    let v = l.log2();
    let r = v.round();
    let c = if (v - r).abs() < 1e-12 { r } else { v.ceil() };
    Ok((c as u32).max(1))
}

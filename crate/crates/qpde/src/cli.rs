//! Batch front end: JSON configuration, experiment dispatch and CSV/JSON
//! output.
//!
//! A configuration is one JSON document with the optional sections `model`,
//! `grid`, `schrodingerisation`, `readout`, `smile`, `resources` and
//! `output`; unknown keys anywhere are rejected and reported with their path.
//! CSV files are comma separated with a header row, `.` as decimal separator,
//! floats written with 17 significant digits and LF line endings. All outputs
//! are deterministic functions of the configuration and the seed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{
    d2_stencil_sweep, euler_sweep, nxi_sweep, run_bs1d, run_heston_scan, run_heston_surface, run_smile,
    AugmentationMode, Bs1dSetup, HestonSetup, SchrodingerSettings, SmileSetup, Sweep,
};
use crate::readout_model::{point_price, query_budget, sampled_price, ReadoutPlan};
use crate::resource_estimator::{quantum_cost, CostModel, McStructure, McVariant, ResourceQuery, BANNER};
use crate::schrodingerizer::Contraction;
use crate::smile_toolkit::{QuoteWeights, DEFAULT_EPS_CONS};

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "qpde", version, about = "Schrödingerised PDE option pricing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of every sampled quantity (overrides `readout.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HestonMode {
    Surface,
    #[value(name = "strike_scan", alias = "strike-scan")]
    StrikeScan,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-asset Black–Scholes: quantum, implicit Euler, expm and analytic prices.
    PriceBs1d(Common),
    /// One-asset Heston: price surface or strike scan at the marked point.
    PriceHeston {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "surface")]
        mode: HestonMode,
    },
    /// Implied-volatility smile from a Heston strike scan, fitted by SSVI.
    Smile(Common),
    /// Unit-constant resource estimates over a (model, d, n) sweep.
    Resources {
        #[command(flatten)]
        common: Common,
        /// Models to sweep (overrides `resources.models`).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Asset counts (overrides `resources.d`).
        #[arg(long, value_delimiter = ',')]
        d: Vec<u32>,
        /// Qubits per direction (overrides `resources.n`).
        #[arg(long, value_delimiter = ',')]
        n: Vec<u32>,
    },
    /// Error-versus-resolution sweeps with fitted slopes.
    Convergence(Common),
}

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

/// Whole configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub schrodingerisation: SchrodingerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smile: Option<SmileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<ResourcesConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Pricing model and contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Bs1d {
        rate: f64,
        sigma: f64,
        maturity: f64,
        strike: f64,
        /// Spot at which the readout is evaluated.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s0: Option<f64>,
    },
    Heston1d {
        rate: f64,
        maturity: f64,
        kappa: f64,
        theta: f64,
        vol_of_vol: f64,
        rho: f64,
        strike: f64,
        s0: f64,
        v0: f64,
        /// Strikes of the scan mode; defaults to `[strike]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strikes: Option<Vec<f64>>,
    },
}

/// Spatial grid and classical-baseline resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub s_max: f64,
    /// Qubits of the price axis.
    pub n: u32,
    /// Qubits of the variance axis (Heston).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_v: Option<u32>,
    #[serde(default)]
    pub v_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    /// Implicit-Euler steps; defaults to `T·N²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_steps: Option<usize>,
    /// Convergence sweep of the stencil test (qubits).
    #[serde(default = "default_n_sweep")]
    pub n_sweep: Vec<u32>,
    /// Convergence sweep of implicit-Euler step counts.
    #[serde(default = "default_steps_sweep")]
    pub steps_sweep: Vec<usize>,
}

fn default_n_sweep() -> Vec<u32> {
    vec![4, 5, 6, 7, 8, 9]
}

fn default_steps_sweep() -> Vec<usize> {
    vec![64, 128, 256, 512, 1024, 2048]
}

/// Schrödingerisation settings; unset fields take model-dependent defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_xi: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_lambda: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<Contraction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationMode>,
    /// Convergence sweep of `n_ξ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_xi_sweep: Option<Vec<u32>>,
}

impl SchrodingerConfig {
    fn settings(&self, base: SchrodingerSettings) -> SchrodingerSettings {
        SchrodingerSettings {
            n_xi: self.n_xi.unwrap_or(base.n_xi),
            eps_schr: self.eps_schr.unwrap_or(base.eps_schr),
            half_width: self.half_width.or(base.half_width),
            segments: self.segments.or(base.segments),
            exact_lambda: self.exact_lambda.unwrap_or(base.exact_lambda),
            contraction: self.contraction.unwrap_or(base.contraction),
            tol: self.tol.unwrap_or(base.tol),
            dense_limit: self.dense_limit.unwrap_or(base.dense_limit),
        }
    }
}

/// Readout of one price from the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    pub eps_v: f64,
    pub delta: f64,
    /// Hadamard-test shots of the sampled estimate; none gives only the exact readout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default = "one")]
    pub n_ref: f64,
    #[serde(default = "one")]
    pub n_ref_xi: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Strikes and SSVI options of the smile command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmileConfig {
    pub strikes: Vec<f64>,
    #[serde(default)]
    pub weights: QuoteWeights,
    #[serde(default = "default_eps_cons")]
    pub eps_cons: f64,
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

/// Resource-estimate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcesConfig {
    pub models: Vec<CostModel>,
    pub d: Vec<u32>,
    pub n: Vec<u32>,
    pub n_xi: u32,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "one_u32")]
    pub q_sigma: u32,
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

impl Default for ResourcesConfig {
    fn default() -> Self {
        Self {
            models: vec![CostModel::Bs1d, CostModel::Heston1d],
            d: vec![1],
            n: (1..=12).collect(),
            n_xi: 4,
            t: 1.0,
            q_sigma: 1,
            eps_rot: default_eps_rot(),
            mc_structure: default_structure(),
            mc_variant: default_variant(),
        }
    }
}

/// Output location.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Parses a configuration document, reporting the path of a bad field.
pub fn parse_config(text: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
    parse_config(&text)
}

fn require<'a, T>(v: &'a Option<T>, path: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::config(path, "section is required by this command"))
}

fn bs1d_setup(cfg: &Config) -> Result<(Bs1dSetup, Option<f64>)> {
    let grid = require(&cfg.grid, "grid")?;
    match require(&cfg.model, "model")? {
        ModelConfig::Bs1d { rate, sigma, maturity, strike, s0 } => Ok((
            Bs1dSetup {
                rate: *rate,
                sigma: *sigma,
                maturity: *maturity,
                strike: *strike,
                s_max: grid.s_max,
                n: grid.n,
                fd_steps: grid.fd_steps,
                augmentation: cfg.schrodingerisation.augmentation.unwrap_or_default(),
                schrodinger: cfg.schrodingerisation.settings(SchrodingerSettings::default()),
            },
            *s0,
        )),
        _ => Err(Error::config("model.kind", "this command needs a `bs1d` model")),
    }
}

fn heston_setup(cfg: &Config) -> Result<(HestonSetup, Vec<f64>)> {
    let grid = require(&cfg.grid, "grid")?;
    match require(&cfg.model, "model")? {
        ModelConfig::Heston1d { rate, maturity, kappa, theta, vol_of_vol, rho, strike, s0, v0, strikes } => {
            let base = HestonSetup::reference().schrodinger;
            let setup = HestonSetup {
                rate: *rate,
                maturity: *maturity,
                kappa: *kappa,
                theta: *theta,
                vol_of_vol: *vol_of_vol,
                rho: *rho,
                s_max: grid.s_max,
                v_min: grid.v_min,
                v_max: *require(&grid.v_max, "grid.v_max")?,
                n_s: grid.n,
                n_v: *require(&grid.n_v, "grid.n_v")?,
                strike: *strike,
                s0: *s0,
                v0: *v0,
                augmentation: cfg.schrodingerisation.augmentation.unwrap_or_default(),
                schrodinger: cfg.schrodingerisation.settings(base),
            };
            Ok((setup, strikes.clone().unwrap_or_else(|| vec![*strike])))
        }
        _ => Err(Error::config("model.kind", "this command needs a `heston1d` model")),
    }
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV table with LF line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn float_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_f64(v)).collect()
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Files written by a command.
pub type Written = Vec<PathBuf>;

#[derive(Serialize)]
struct Bs1dSummary<'a> {
    rows: usize,
    fd_steps: usize,
    segments: usize,
    lambda: f64,
    mu: f64,
    half_width: f64,
    qubits: u32,
    norm: f64,
    p_post: &'a [f64],
    max_abs_quantum_expm: f64,
    max_abs_quantum_analytic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    readout: Option<ReadoutSummary>,
}

#[derive(Serialize)]
struct ReadoutSummary {
    spot: f64,
    node: usize,
    exact_readout: f64,
    query_budget: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampled: Option<f64>,
    seed: u64,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `price-bs1d`: writes `bs1d.csv` and `bs1d_summary.json`.
pub fn cmd_price_bs1d(cfg: &Config, out: &Path, seed: Option<u64>) -> Result<Written> {
    let (setup, s0) = bs1d_setup(cfg)?;
    let r = run_bs1d(&setup)?;
    let rows: Vec<Vec<String>> = (0..r.s.len())
        .map(|k| {
            float_row(&[
                r.s[k],
                r.v_quantum[k],
                r.v_fd[k],
                r.v_expm[k],
                r.v_analytic[k],
                (r.v_quantum[k] - r.v_expm[k]).abs(),
                (r.v_quantum[k] - r.v_analytic[k]).abs(),
                (r.v_quantum[k] - r.v_fd[k]).abs(),
                (r.v_fd[k] - r.v_analytic[k]).abs(),
                (r.v_expm[k] - r.v_analytic[k]).abs(),
            ])
        })
        .collect();
    let csv_path = out.join("bs1d.csv");
    write_csv(
        &csv_path,
        &[
            "S",
            "V_quantum",
            "V_fd",
            "V_expm",
            "V_analytic",
            "abs_quantum_expm",
            "abs_quantum_analytic",
            "abs_quantum_fd",
            "abs_fd_analytic",
            "abs_expm_analytic",
        ],
        &rows,
    )?;
    let readout = match &cfg.readout {
        None => None,
        Some(rc) => {
            let spot = s0.unwrap_or(setup.strike);
            let node = r
                .s
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - spot).abs().total_cmp(&(b.1 - spot).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            Some(readout_summary(rc, seed, &r.solution, r.s.len(), node, r.s[node])?)
        }
    };
    let summary = Bs1dSummary {
        rows: r.s.len(),
        fd_steps: r.fd_steps,
        segments: r.solution.segments,
        lambda: r.solution.lambda,
        mu: r.solution.mu,
        half_width: r.solution.half_width,
        qubits: r.solution.qubits(),
        norm: r.solution.norm,
        p_post: &r.solution.p_post,
        max_abs_quantum_expm: max_abs_diff(&r.v_quantum, &r.v_expm),
        max_abs_quantum_analytic: max_abs_diff(&r.v_quantum, &r.v_analytic),
        readout,
    };
    let json_path = out.join("bs1d_summary.json");
    write_json(&json_path, &summary)?;
    Ok(vec![csv_path, json_path])
}

fn readout_summary(
    rc: &ReadoutConfig,
    seed: Option<u64>,
    sol: &crate::pipeline::SchrodingerSolution,
    state_dim: usize,
    node: usize,
    spot: f64,
) -> Result<ReadoutSummary> {
    let seed = seed.unwrap_or(rc.seed);
    let plan = ReadoutPlan {
        q: node,
        eps_v: rc.eps_v,
        delta: rc.delta,
        n_ref: rc.n_ref,
        n_ref_xi: rc.n_ref_xi,
        seed,
    };
    plan.validate()?;
    let aug = sol.direction[state_dim..].iter().map(|x| x * x).sum::<f64>().sqrt() * sol.norm;
    let exact = point_price(&sol.direction, node, sol.norm, state_dim, aug)?;
    let sampled = match rc.shots {
        Some(shots) => Some(sampled_price(&sol.direction, node, sol.norm, state_dim, aug, &plan, shots)?),
        None => None,
    };
    Ok(ReadoutSummary {
        spot,
        node,
        exact_readout: exact,
        query_budget: query_budget(rc.eps_v, sol.norm, rc.delta)?,
        shots: rc.shots,
        sampled,
        seed,
    })
}

/// `price-heston`: surface mode writes `heston_surface.csv` and
/// `heston_summary.json`; scan mode writes `heston_scan.csv`.
pub fn cmd_price_heston(cfg: &Config, mode: HestonMode, out: &Path) -> Result<Written> {
    let (setup, strikes) = heston_setup(cfg)?;
    match mode {
        HestonMode::Surface => {
            let h = run_heston_surface(&setup)?;
            let nv = h.v.len();
            let mut rows = Vec::with_capacity(h.v_quantum.len());
            for (i, &s) in h.s.iter().enumerate() {
                for (j, &v) in h.v.iter().enumerate() {
                    let k = i * nv + j;
                    rows.push(float_row(&[
                        s,
                        v,
                        h.v_quantum[k],
                        h.v_expm[k],
                        h.v_semi_analytic[k],
                        (h.v_quantum[k] - h.v_expm[k]).abs(),
                        (h.v_quantum[k] - h.v_semi_analytic[k]).abs(),
                    ]));
                }
            }
            let csv_path = out.join("heston_surface.csv");
            write_csv(
                &csv_path,
                &["S", "v", "V_quantum", "V_expm", "V_semi_analytic", "abs_quantum_expm", "abs_quantum_semi_analytic"],
                &rows,
            )?;
            #[derive(Serialize)]
            struct Summary<'a> {
                region: &'a crate::pipeline::MarkedRegion,
                region_max_error: f64,
                segments: usize,
                lambda: f64,
                mu: f64,
                half_width: f64,
                qubits: u32,
                norm: f64,
            }
            let json_path = out.join("heston_summary.json");
            write_json(
                &json_path,
                &Summary {
                    region: &h.region,
                    region_max_error: h.region.max_error(),
                    segments: h.solution.segments,
                    lambda: h.solution.lambda,
                    mu: h.solution.mu,
                    half_width: h.solution.half_width,
                    qubits: h.solution.qubits(),
                    norm: h.solution.norm,
                },
            )?;
            Ok(vec![csv_path, json_path])
        }
        HestonMode::StrikeScan => {
            let rows = run_heston_scan(&setup, &strikes)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| float_row(&[r.strike, r.quantum, r.expm, r.semi_analytic, (r.quantum - r.semi_analytic).abs()]))
                .collect();
            let csv_path = out.join("heston_scan.csv");
            write_csv(&csv_path, &["K", "V_quantum", "V_expm", "V_semi_analytic", "abs_quantum_semi_analytic"], &table)?;
            Ok(vec![csv_path])
        }
    }
}

/// `smile`: writes `smile_quotes.csv`, `smile_curves.csv` and `smile.json`.
pub fn cmd_smile(cfg: &Config, out: &Path) -> Result<Written> {
    let (heston, _) = heston_setup(cfg)?;
    let sc = require(&cfg.smile, "smile")?;
    let setup = SmileSetup {
        heston,
        strikes: sc.strikes.clone(),
        weights: sc.weights,
        eps_cons: sc.eps_cons,
        k_range: sc.k_range,
        k_points: sc.k_points,
    };
    let r = run_smile(&setup)?;
    let quotes: Vec<Vec<String>> = (0..r.strikes.len())
        .map(|i| {
            float_row(&[
                r.strikes[i],
                r.log_moneyness[i],
                r.quantum.prices[i],
                r.semi_analytic.prices[i],
                r.quantum.implied_vols[i],
                r.semi_analytic.implied_vols[i],
                r.quantum.fitted_vols[i],
                r.semi_analytic.fitted_vols[i],
                r.rel_error_pct[i],
            ])
        })
        .collect();
    let q_path = out.join("smile_quotes.csv");
    write_csv(
        &q_path,
        &[
            "K",
            "k",
            "price_quantum",
            "price_semi_analytic",
            "iv_quantum",
            "iv_semi_analytic",
            "ssvi_vol_quantum",
            "ssvi_vol_semi_analytic",
            "rel_error_pct",
        ],
        &quotes,
    )?;
    let curves: Vec<Vec<String>> = (0..r.k_grid.len())
        .map(|i| float_row(&[r.k_grid[i], r.curve_quantum[i], r.curve_semi_analytic[i]]))
        .collect();
    let c_path = out.join("smile_curves.csv");
    write_csv(&c_path, &["k", "ssvi_vol_quantum", "ssvi_vol_semi_analytic"], &curves)?;
    let j_path = out.join("smile.json");
    #[derive(Serialize)]
    struct Method<'a> {
        method: &'a str,
        theta: f64,
        rho: f64,
        lambda: f64,
        objective: f64,
        rms: f64,
        g_min: f64,
        wing_slopes: (f64, f64),
    }
    fn m(f: &crate::pipeline::SmileFit) -> Method<'_> {
        Method {
        method: &f.method,
        theta: f.fit.params.theta,
        rho: f.fit.params.rho,
        lambda: f.fit.params.lambda,
        objective: f.fit.objective,
        rms: f.fit.rms,
        g_min: f.g_min,
        wing_slopes: f.wing_slopes,
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        methods: Vec<Method<'a>>,
        max_rel_error_pct: f64,
    }
    write_json(
        &j_path,
        &Summary {
            methods: vec![m(&r.quantum), m(&r.semi_analytic)],
            max_rel_error_pct: r.rel_error_pct.iter().cloned().fold(0.0, f64::max),
        },
    )?;
    Ok(vec![q_path, c_path, j_path])
}

/// `resources`: writes `resources.csv` (one row per model, d, n cell) and
/// `resources.json` (full reports with the convention banner).
pub fn cmd_resources(rc: &ResourcesConfig, out: &Path) -> Result<Written> {
    if rc.models.is_empty() || rc.d.is_empty() || rc.n.is_empty() {
        return Err(Error::config("resources", "models, d and n must be non-empty"));
    }
    let mut reports = Vec::new();
    for &model in &rc.models {
        for &d in &rc.d {
            if matches!(model, CostModel::Bs1d | CostModel::Heston1d) && d != 1 {
                continue;
            }
            for &n in &rc.n {
                let q = ResourceQuery {
                    model,
                    d,
                    n,
                    n_xi: rc.n_xi,
                    t: rc.t,
                    q_sigma: rc.q_sigma,
                    eps_rot: rc.eps_rot,
                    mc_structure: rc.mc_structure,
                    mc_variant: rc.mc_variant,
                };
                reports.push(quantum_cost(&q)?);
            }
        }
    }
    if reports.is_empty() {
        return Err(Error::config("resources.d", "one-asset models need d = 1 in the sweep"));
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.model.name().to_string(), r.d.to_string(), r.n.to_string(), r.n_xi.to_string()];
            row.extend(float_row(&[
                r.state_prep,
                r.evolution,
                r.readout_factor,
                r.end_to_end,
                r.t_count,
                r.classical_pde,
                r.mc_cost,
                r.advantage_ratio,
            ]));
            row
        })
        .collect();
    let csv_path = out.join("resources.csv");
    write_csv(
        &csv_path,
        &[
            "model",
            "d",
            "n",
            "n_xi",
            "state_prep",
            "evolution",
            "readout_factor",
            "end_to_end",
            "t_count",
            "classical_pde",
            "mc_cost",
            "advantage_ratio",
        ],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Doc<'a> {
        banner: &'static str,
        log_base: u32,
        query: &'a ResourcesConfig,
        reports: &'a [crate::resource_estimator::ResourceReport],
    }
    let json_path = out.join("resources.json");
    write_json(
        &json_path,
        &Doc {
            banner: BANNER,
            log_base: 2,
            query: rc,
            reports: &reports,
        },
    )?;
    Ok(vec![csv_path, json_path])
}

/// `convergence`: writes `convergence.csv` (sweep, parameter, resolution,
/// error) and `convergence.json` (fitted slopes).
pub fn cmd_convergence(cfg: &Config, out: &Path) -> Result<Written> {
    let (setup, _) = bs1d_setup(cfg)?;
    let grid = require(&cfg.grid, "grid")?;
    let nxis = cfg
        .schrodingerisation
        .n_xi_sweep
        .clone()
        .unwrap_or_else(|| (6..=setup.schrodinger.n_xi).collect());
    let sweeps: Vec<Sweep> = vec![
        d2_stencil_sweep(&grid.n_sweep)?,
        euler_sweep(&setup, &grid.steps_sweep)?,
        nxi_sweep(&setup, &nxis)?,
    ];
    let mut rows = Vec::new();
    for s in &sweeps {
        for (x, e) in s.resolution.iter().zip(&s.error) {
            rows.push(vec![s.name.clone(), s.parameter.clone(), fmt_f64(*x), fmt_f64(*e)]);
        }
    }
    let csv_path = out.join("convergence.csv");
    write_csv(&csv_path, &["sweep", "parameter", "resolution", "error"], &rows)?;
    let json_path = out.join("convergence.json");
    write_json(&json_path, &sweeps)?;
    Ok(vec![csv_path, json_path])
}

/// Maps an error to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Runs a parsed command line and returns the written files.
pub fn run(cli: &Cli) -> Result<Written> {
    let common = match &cli.command {
        Command::PriceBs1d(c) | Command::Smile(c) | Command::Convergence(c) => c,
        Command::PriceHeston { common, .. } | Command::Resources { common, .. } => common,
    };
    let cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    match &cli.command {
        Command::PriceBs1d(_) => cmd_price_bs1d(&cfg, &out, common.seed),
        Command::PriceHeston { mode, .. } => cmd_price_heston(&cfg, *mode, &out),
        Command::Smile(_) => cmd_smile(&cfg, &out),
        Command::Convergence(_) => cmd_convergence(&cfg, &out),
        Command::Resources { models, d, n, .. } => {
            let mut rc = cfg.resources.clone().unwrap_or_default();
            if !models.is_empty() {
                rc.models = models
                    .iter()
                    .map(|m| {
                        serde_json::from_value(serde_json::Value::String(m.clone()))
                            .map_err(|_| Error::config("--models", format!("unknown model `{m}`")))
                    })
                    .collect::<Result<_>>()?;
            }
            if !d.is_empty() {
                rc.d = d.clone();
            }
            if !n.is_empty() {
                rc.n = n.clone();
            }
            cmd_resources(&rc, &out)
        }
    }
}
